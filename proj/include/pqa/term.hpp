#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pqa {

using Rational = boost::multiprecision::cpp_rational;

std::string rational_str(const Rational &r);
Rational parse_rational(const std::string &s);

enum class Mark : std::uint8_t { Plain, Shadow, Synced };

struct Action {
    std::string name;
    std::vector<int> idx;
    Mark mark = Mark::Plain;

    // "name(i,j)" with "@" prefix for shadows and "!" suffix for synced labels.
    std::string key() const;
    std::string plain_key() const;
    Action with_mark(Mark m) const;

    friend bool operator==(const Action &, const Action &) = default;
    friend auto operator<=>(const Action &, const Action &) = default;
};

Action parse_action_key(const std::string &key);

// Entries are full keys ("send(0)", "@M(1)", "M(1)!") or family names ("send", "@M", "M!").
// A family name covers every indexed member with the same mark.
class ActionSet {
public:
    ActionSet() = default;
    explicit ActionSet(std::vector<std::string> entries);

    bool contains(const Action &a) const;
    const std::vector<std::string> &entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    friend bool operator==(const ActionSet &a, const ActionSet &b) { return a.entries_ == b.entries_; }

private:
    struct Entry {
        std::string name;
        Mark mark;
        bool family;
        std::vector<int> idx;
    };
    std::vector<std::string> entries_;
    std::vector<Entry> parsed_;
};

// Renaming on base names; marks and indices are carried over.
using RenameMap = std::vector<std::pair<std::string, std::string>>;
Action rename_action(const RenameMap &f, const Action &a);

enum class Op : std::uint8_t {
    Delta,
    Tau,
    Atom,
    Seq,
    Alt,
    PChoice,
    Par,
    MergeMem,
    LeftMerge,
    CommMerge,
    EntMerge,
    Encap,
    Abstr,
    Proj,
    Rename,
    Priority,
    Unless,
    RecVar,
    RecSpec,
};

struct Node;
using Term = std::shared_ptr<const Node>;

struct RecEnv {
    std::vector<std::pair<std::string, Term>> eqs;
    std::vector<std::string> free;  // sorted free variables of the whole specification
    std::size_t hash = 0;

    const Term *find(const std::string &var) const;
};
using EnvPtr = std::shared_ptr<const RecEnv>;

struct Node {
    Op op;
    bool dyn = false;     // breve marker on atoms; computed dynamic shape for composites
    bool closed = true;   // no free recursion variables
    bool has_rec = false;
    bool any_dyn = false;  // some breve atom inside
    std::size_t hash = 0;
    std::uint32_t size = 1;
    Action act;
    Rational prob;
    int n = 0;
    std::shared_ptr<const ActionSet> set;
    std::shared_ptr<const RenameMap> ren;
    std::string var;
    EnvPtr env;
    std::vector<Term> kids;
};

Term mk_delta(bool dyn = false);
Term mk_tau(bool dyn = false);
Term mk_atom(const Action &a, bool dyn = false);
Term mk_atom(const std::string &name, std::vector<int> idx = {}, Mark m = Mark::Plain);
Term mk_seq(const Term &x, const Term &y);
Term mk_alt(const Term &x, const Term &y);
Term mk_pchoice(const Term &x, const Rational &p, const Term &y);
Term mk_par(const Term &x, const Term &y);
Term mk_mergemem(const Term &x, const Term &z, const Term &y, const Term &w);
Term mk_lmerge(const Term &x, const Term &y);
Term mk_cmerge(const Term &x, const Term &y);
Term mk_emerge(const Term &x, const Term &y);
Term mk_encap(std::shared_ptr<const ActionSet> h, const Term &x);
Term mk_abstr(std::shared_ptr<const ActionSet> i, const Term &x);
Term mk_proj(int n, const Term &x);
Term mk_rename(std::shared_ptr<const RenameMap> f, const Term &x);
Term mk_priority(const Term &x);
Term mk_unless(const Term &x, const Term &y);
Term mk_var(const std::string &v);
Term mk_rec(const std::string &v, EnvPtr env);
EnvPtr mk_env(std::vector<std::pair<std::string, Term>> eqs);

// Same operator and payload, new children.
Term with_kids(const Term &t, std::vector<Term> kids);

bool term_eq(const Term &a, const Term &b);
int term_cmp(const Term &a, const Term &b);

struct TermHash {
    std::size_t operator()(const Term &t) const { return t->hash; }
};
struct TermEq {
    bool operator()(const Term &a, const Term &b) const { return term_eq(a, b); }
};
struct TermLess {
    bool operator()(const Term &a, const Term &b) const { return term_cmp(a, b) < 0; }
};

std::string print(const Term &t);

bool is_static(const Term &t);
bool is_dynamic(const Term &t);
bool is_basic_term(const Term &t);
bool is_basic_plus(const Term &t);

// One unfolding step: <X|E> becomes t_X with bound variables replaced by <Y|E>.
Term unfold(const std::string &var, const EnvPtr &env);
Term substitute(const Term &t, const std::vector<std::pair<std::string, Term>> &sub);

// Every occurrence of a bound variable sits behind an atomic prefix.
void check_guarded(const EnvPtr &env);

// Collects every atom (with marks) syntactically present, unfolding each environment once.
void collect_actions(const Term &t, std::vector<Action> &out);

// Child navigation for rewrite paths; indices follow the kids vector.
Term subterm_at(const Term &t, const std::vector<int> &path);
Term replace_at(const Term &t, const std::vector<int> &path, const Term &r);
std::string path_str(const std::vector<int> &path);
std::vector<int> parse_path(const std::string &s);

}  // namespace pqa

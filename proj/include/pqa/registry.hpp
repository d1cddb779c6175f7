#pragma once

#include "pqa/qstate.hpp"
#include "pqa/term.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace pqa {

enum class EffectKind { Classical, Unitary, Projection };

struct ActionDef {
    Action act;  // plain
    EffectKind kind = EffectKind::Classical;
    std::vector<std::string> targets;
    CMat matrix;
    std::string family;  // measurement family, projections only
    std::optional<Rational> weight;
};

class Registry {
public:
    std::vector<Register> regs;
    QStatePtr init;

    void add_register(const std::string &name, Visibility vis);
    void set_initial(QState s);
    void add_classical(const Action &a);
    void add_unitary(const Action &a, std::vector<std::string> targets, CMat u);
    void add_projection(const Action &a, std::vector<std::string> targets, CMat p, std::string family = {},
                        std::optional<Rational> weight = {});
    void add_gamma(const Action &a, const Action &b, const Action &c);
    void add_less(const std::string &lo, const std::string &hi);
    // Validates families and priority acyclicity; computes the fingerprint.
    void finalize();

    // Definition behind a plain, shadow or synced label; nullptr for unregistered names.
    const ActionDef *find(const Action &a) const;
    const ActionDef &require(const Action &a) const;
    std::optional<Action> gamma(const Action &a, const Action &b) const;
    bool less(const Action &a, const Action &b) const;
    const std::map<std::string, ActionDef> &defs() const { return defs_; }
    const std::string &fingerprint() const { return fingerprint_; }
    std::vector<std::string> family_members(const std::string &family) const;
    bool is_family(const std::string &name) const;

    nlohmann::json to_json() const;
    static Registry from_json(const nlohmann::json &j);
    static Registry load(const std::string &path);

private:
    std::map<std::string, ActionDef> defs_;
    std::map<std::pair<std::string, std::string>, Action> gamma_;
    std::set<std::pair<std::string, std::string>> less_;
    std::set<std::pair<std::string, std::string>> less_closure_;
    std::string fingerprint_;
};

using RegistryPtr = std::shared_ptr<const Registry>;

// Checks every atom, encapsulation set, abstraction set and renaming against the registry.
void elaborate(const Term &t, const Registry &reg);

nlohmann::json matrix_to_json(const CMat &m);
CMat matrix_from_json(const nlohmann::json &j, std::size_t dim);

}  // namespace pqa

#include "pqa/parser.hpp"

#include "pqa/error.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace pqa {

namespace {

enum class Tok { Ident, Int, Sym, End };

struct Token {
    Tok kind;
    std::string text;
    int line, col;
};

const char *const kSymbols[] = {"||_", "||", "[+", "][", "<>", "<|", "->", ".", "+", "|", "(", ")", "{",
                                 "}",   "[",  "]",  ",",  ";",  "=",  "@",  "!", "/"};

std::vector<Token> lex(const std::string &s) {
    std::vector<Token> out;
    int line = 1, col = 1;
    std::size_t i = 0;
    auto advance = [&](std::size_t n) {
        for (std::size_t k = 0; k < n; ++k, ++i) {
            if (s[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
    };
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            advance(1);
            continue;
        }
        if (c == '#') {
            while (i < s.size() && s[i] != '\n')
                advance(1);
            continue;
        }
        int l = line, cl = col;
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_'))
                ++j;
            out.push_back({Tok::Ident, s.substr(i, j - i), l, cl});
            advance(j - i);
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c))) {
            std::size_t j = i;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j])))
                ++j;
            out.push_back({Tok::Int, s.substr(i, j - i), l, cl});
            advance(j - i);
            continue;
        }
        bool matched = false;
        for (const char *sym : kSymbols) {
            std::size_t n = std::char_traits<char>::length(sym);
            if (s.compare(i, n, sym) == 0) {
                out.push_back({Tok::Sym, sym, l, cl});
                advance(n);
                matched = true;
                break;
            }
        }
        if (!matched)
            throw Error(ErrorCode::SyntaxError, std::string("unexpected character '") + c + "'", l, cl);
    }
    out.push_back({Tok::End, "", line, col});
    return out;
}

bool is_keyword(const std::string &s) {
    return s == "delta" || s == "tau" || s == "encap" || s == "abstr" || s == "proj" || s == "rename" ||
           s == "theta" || s == "rec" || s == "where";
}

class Parser {
public:
    explicit Parser(const std::string &text) : toks_(lex(text)) {}

    Term parse_all() {
        Term t = expr();
        if (peek().kind != Tok::End)
            fail("unexpected '" + peek().text + "'");
        return t;
    }

    std::shared_ptr<const ActionSet> parse_set_only() {
        auto s = action_set("{", "}");
        if (peek().kind != Tok::End)
            fail("unexpected '" + peek().text + "'");
        return s;
    }

private:
    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    std::vector<std::vector<std::string>> scopes_;

    const Token &peek(std::size_t k = 0) const { return toks_[std::min(pos_ + k, toks_.size() - 1)]; }

    [[noreturn]] void fail(const std::string &msg) const {
        throw Error(ErrorCode::SyntaxError, msg, peek().line, peek().col);
    }

    bool is_sym(const char *s, std::size_t k = 0) const {
        return peek(k).kind == Tok::Sym && peek(k).text == s;
    }

    bool accept(const char *s) {
        if (is_sym(s)) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(const char *s) {
        if (!accept(s))
            fail(std::string("expected '") + s + "'" + (peek().kind == Tok::End ? " before end of input" : ", found '" + peek().text + "'"));
    }

    std::string ident() {
        if (peek().kind != Tok::Ident)
            fail("expected identifier");
        return toks_[pos_++].text;
    }

    int integer() {
        if (peek().kind != Tok::Int)
            fail("expected integer");
        return std::stoi(toks_[pos_++].text);
    }

    Term expr() { return pchoice(); }

    Term pchoice() {
        int line = peek().line, col = peek().col;
        std::vector<Term> ops{alt()};
        std::vector<Rational> ws;
        while (accept("[+")) {
            Rational w = rational();
            expect("]");
            if (w <= 0 || w >= 1)
                throw Error(ErrorCode::BadProbability, "weight " + rational_str(w) + " outside (0,1)", line, col);
            ws.push_back(w);
            ops.push_back(alt());
        }
        if (ws.empty())
            return ops[0];
        Rational total = 0;
        for (const auto &w : ws)
            total += w;
        if (total >= 1)
            throw Error(ErrorCode::BadProbability, "chain weights sum to " + rational_str(total), line, col);
        ws.push_back(1 - total);
        Term acc = ops[0];
        Rational accw = ws[0];
        for (std::size_t i = 1; i < ops.size(); ++i) {
            acc = mk_pchoice(acc, accw / (accw + ws[i]), ops[i]);
            accw += ws[i];
        }
        return acc;
    }

    Rational rational() {
        std::string s = std::to_string(integer());
        if (accept("/"))
            s += "/" + std::to_string(integer());
        return parse_rational(s);
    }

    Term alt() {
        Term l = par();
        if (accept("+"))
            return mk_alt(l, alt());
        return l;
    }

    Term par() {
        Term l = lmerge();
        if (accept("||"))
            return mk_par(l, par());
        return l;
    }

    Term lmerge() {
        Term l = emerge();
        if (accept("||_"))
            return mk_lmerge(l, lmerge());
        return l;
    }

    Term emerge() {
        Term l = comm();
        if (accept("<>"))
            return mk_emerge(l, emerge());
        return l;
    }

    Term comm() {
        Term l = unless();
        if (accept("|"))
            return mk_cmerge(l, comm());
        return l;
    }

    Term unless() {
        Term l = seq();
        if (accept("<|"))
            return mk_unless(l, unless());
        return l;
    }

    Term seq() {
        Term l = primary();
        if (accept("."))
            return mk_seq(l, seq());
        return l;
    }

    bool bound(const std::string &v) const {
        for (auto it = scopes_.rbegin(); it != scopes_.rend(); ++it)
            for (const auto &x : *it)
                if (x == v)
                    return true;
        return false;
    }

    Action action_ref() {
        Action a;
        if (accept("@"))
            a.mark = Mark::Shadow;
        a.name = ident();
        if (is_keyword(a.name))
            fail("keyword '" + a.name + "' used as action name");
        if (is_sym("(") && peek(1).kind == Tok::Int) {
            expect("(");
            a.idx.push_back(integer());
            while (accept(","))
                a.idx.push_back(integer());
            expect(")");
        }
        if (accept("!")) {
            if (a.mark == Mark::Shadow)
                fail("an action cannot be both shadow and synced");
            a.mark = Mark::Synced;
        }
        return a;
    }

    std::shared_ptr<const ActionSet> action_set(const char *open, const char *close) {
        expect(open);
        std::vector<std::string> entries;
        if (!accept(close)) {
            do
                entries.push_back(action_ref().key());
            while (accept(","));
            expect(close);
        }
        return std::make_shared<ActionSet>(std::move(entries));
    }

    Term paren_arg() {
        expect("(");
        Term t = expr();
        expect(")");
        return t;
    }

    Term primary() {
        const Token &tk = peek();
        if (tk.kind == Tok::Ident) {
            const std::string &w = tk.text;
            if (w == "delta") {
                ++pos_;
                return mk_delta();
            }
            if (w == "tau") {
                ++pos_;
                return mk_tau();
            }
            if (w == "encap" || w == "abstr") {
                ++pos_;
                auto s = action_set("{", "}");
                Term x = paren_arg();
                return w == "encap" ? mk_encap(s, x) : mk_abstr(s, x);
            }
            if (w == "proj") {
                ++pos_;
                expect("[");
                int n = integer();
                expect("]");
                if (n < 1)
                    fail("projection index must be positive");
                return mk_proj(n, paren_arg());
            }
            if (w == "rename") {
                ++pos_;
                expect("[");
                auto f = std::make_shared<RenameMap>();
                if (!accept("]")) {
                    do {
                        std::string from = ident();
                        expect("->");
                        std::string to = ident();
                        for (const auto &p : *f)
                            if (p.first == from)
                                fail("'" + from + "' renamed twice");
                        f->emplace_back(from, to);
                    } while (accept(","));
                    expect("]");
                }
                std::sort(f->begin(), f->end());
                return mk_rename(f, paren_arg());
            }
            if (w == "theta") {
                ++pos_;
                return mk_priority(paren_arg());
            }
            if (w == "rec")
                return rec();
            if (w == "where")
                fail("unexpected 'where'");
            if (bound(w) && !(is_sym("(", 1) && peek(2).kind == Tok::Int) && !is_sym("!", 1)) {
                ++pos_;
                return mk_var(w);
            }
            return mk_atom(action_ref());
        }
        if (is_sym("@"))
            return mk_atom(action_ref());
        if (accept("(")) {
            Term x = expr();
            if (accept(",")) {
                Term z = expr();
                expect(")");
                expect("][");
                expect("(");
                Term y = expr();
                expect(",");
                Term wt = expr();
                expect(")");
                return mk_mergemem(x, z, y, wt);
            }
            expect(")");
            return x;
        }
        if (tk.kind == Tok::End)
            fail("unexpected end of input");
        fail("unexpected '" + tk.text + "'");
    }

    Term rec() {
        int line = peek().line, col = peek().col;
        ++pos_;
        std::string head = ident();
        if (peek().kind != Tok::Ident || peek().text != "where")
            fail("expected 'where'");
        ++pos_;
        expect("{");
        // Equation names are collected first so bodies may refer forward.
        std::vector<std::string> names;
        {
            std::size_t save = pos_;
            int depth = 0;
            bool at_start = true;
            while (peek().kind != Tok::End) {
                if (is_sym("{"))
                    ++depth;
                if (is_sym("}")) {
                    if (depth == 0)
                        break;
                    --depth;
                }
                if (depth == 0 && at_start && peek().kind == Tok::Ident && is_sym("=", 1))
                    names.push_back(peek().text);
                at_start = depth == 0 && is_sym(";");
                ++pos_;
            }
            pos_ = save;
        }
        scopes_.push_back(names);
        std::vector<std::pair<std::string, Term>> eqs;
        do {
            if (is_sym("}"))
                break;
            std::string v = ident();
            if (is_keyword(v))
                fail("keyword '" + v + "' used as variable");
            expect("=");
            eqs.emplace_back(v, expr());
        } while (accept(";"));
        expect("}");
        scopes_.pop_back();
        EnvPtr env = mk_env(std::move(eqs));
        if (!env->find(head))
            throw Error(ErrorCode::UnboundVariable, "no equation for " + head, line, col);
        try {
            check_guarded(env);
        } catch (const Error &e) {
            throw Error(e.code(), e.detail(), line, col);
        }
        return mk_rec(head, env);
    }
};

}  // namespace

Term parse_term(const std::string &text) { return Parser(text).parse_all(); }

Term parse_term_file(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::SyntaxError, "cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_term(ss.str());
}

std::shared_ptr<const ActionSet> parse_action_set(const std::string &text) { return Parser(text).parse_set_only(); }

}  // namespace pqa

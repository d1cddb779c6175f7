#include "pqa/sos.hpp"

#include <sstream>

namespace pqa {

using nlohmann::json;

static const char *kind_name(NodeKind k) {
    switch (k) {
    case NodeKind::Prob: return "prob";
    case NodeKind::Action: return "action";
    case NodeKind::Nil: return "nil";
    case NodeKind::Trunc: return "truncated";
    }
    return "?";
}

static std::string node_text(const GNode &n) {
    switch (n.kind) {
    case NodeKind::Nil: return "NIL";
    case NodeKind::Trunc: return "TRUNCATED";
    default: return print(n.term);
    }
}

static std::string label_text(const AEdge &e) {
    if (is_tau(e.label) && !is_tau(e.origin))
        return "tau[" + e.origin.key() + "]";
    return e.label.key();
}

static std::string dot_escape(const std::string &s, std::size_t limit = 80) {
    std::string out;
    for (char c : s.substr(0, limit)) {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c;
    }
    if (s.size() > limit)
        out += "...";
    return out;
}

std::string to_dot(const ConfigGraph &g) {
    std::ostringstream os;
    os << "digraph lts {\n  rankdir=LR;\n";
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto &n = g.nodes[i];
        const char *shape = n.kind == NodeKind::Prob ? "circle" : n.kind == NodeKind::Action ? "box" : "doublecircle";
        os << "  n" << i << " [shape=" << shape << ",label=\"" << i << ": " << dot_escape(node_text(n)) << "\"";
        if (static_cast<int>(i) == g.root)
            os << ",style=bold";
        os << "];\n";
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        for (const auto &e : g.pout[i])
            os << "  n" << i << " -> n" << e.to << " [style=dashed,label=\"" << rational_str(e.weight) << "\"];\n";
        for (const auto &e : g.aout[i])
            os << "  n" << i << " -> n" << e.to << " [label=\"" << dot_escape(label_text(e)) << "\"];\n";
    }
    os << "}\n";
    return os.str();
}

json to_json(const ConfigGraph &g, bool with_states) {
    json j;
    j["root"] = g.root;
    j["truncated"] = g.truncated();
    j["depth_bound"] = g.depth_bound;
    j["nodes"] = json::array();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const auto &n = g.nodes[i];
        json o = {{"id", i}, {"kind", kind_name(n.kind)}, {"depth", n.depth}};
        if (n.term)
            o["term"] = print(n.term);
        if (with_states && n.rho)
            o["state"] = matrix_to_json(n.rho->rho);
        j["nodes"].push_back(o);
    }
    j["prob_edges"] = json::array();
    j["action_edges"] = json::array();
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        for (const auto &e : g.pout[i])
            j["prob_edges"].push_back(
                {{"from", i}, {"to", e.to}, {"weight", rational_str(e.weight)}, {"declared", rational_str(e.declared)}});
        for (const auto &e : g.aout[i])
            j["action_edges"].push_back({{"from", i}, {"to", e.to}, {"label", e.label.key()}, {"origin", e.origin.key()}});
    }
    j["diagnostics"] = json::array();
    for (const auto &d : g.diags)
        j["diagnostics"].push_back({{"kind", d.kind}, {"message", d.message}, {"node", d.node}});
    return j;
}

std::string to_text(const ConfigGraph &g) {
    std::ostringstream os;
    std::size_t pe = 0, ae = 0;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        pe += g.pout[i].size();
        ae += g.aout[i].size();
    }
    os << "nodes " << g.nodes.size() << ", probabilistic edges " << pe << ", action edges " << ae
       << (g.truncated() ? ", truncated" : "") << "\n";
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        os << i << " [" << kind_name(g.nodes[i].kind) << "] " << node_text(g.nodes[i]) << "\n";
        for (const auto &e : g.pout[i])
            os << "  ~" << rational_str(e.weight) << "~> " << e.to << "\n";
        for (const auto &e : g.aout[i])
            os << "  --" << label_text(e) << "--> " << e.to << "\n";
    }
    for (const auto &d : g.diags)
        os << "warning: " << d.kind << " at node " << d.node << ": " << d.message << "\n";
    return os.str();
}

}  // namespace pqa

#include "driftdx/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace driftdx {

void write_report_json(const nlohmann::json& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw RunError("cannot write " + path);
    out << report.dump(2) << "\n";
    if (!out) throw RunError("write failed for " + path);
}

nlohmann::json read_report_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("invalid report JSON: ") + e.what());
    }
    return j;
}

namespace {

std::string fmt(double v, int digits = 3) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string xml_escape(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

constexpr const char* kRed = "#d62728";
constexpr const char* kGray = "#aaaaaa";

struct Node {
    double x = 0, y = 0;
    std::string title;
    std::string strength;  // flag-strength label
    std::string extra;     // rule text or note, possibly empty
    bool hot = false;      // red
};

void emit_node(std::ostringstream& svg, const Node& n, double w, double h) {
    svg << "<rect x=\"" << fmt(n.x, 1) << "\" y=\"" << fmt(n.y, 1) << "\" width=\"" << fmt(w, 1)
        << "\" height=\"" << fmt(h, 1) << "\" rx=\"6\" fill=\"" << (n.hot ? kRed : kGray)
        << "\" stroke=\"#333333\"/>\n";
    double cx = n.x + w / 2;
    svg << "<text x=\"" << fmt(cx, 1) << "\" y=\"" << fmt(n.y + 20, 1)
        << "\" text-anchor=\"middle\" font-size=\"13\" font-weight=\"bold\" fill=\"#ffffff\">"
        << xml_escape(n.title) << "</text>\n";
    svg << "<text x=\"" << fmt(cx, 1) << "\" y=\"" << fmt(n.y + 38, 1)
        << "\" text-anchor=\"middle\" font-size=\"11\" fill=\"#ffffff\">" << xml_escape(n.strength)
        << "</text>\n";
    if (!n.extra.empty()) {
        svg << "<text x=\"" << fmt(cx, 1) << "\" y=\"" << fmt(n.y + 54, 1)
            << "\" text-anchor=\"middle\" font-size=\"10\" fill=\"#ffffff\">"
            << xml_escape(n.extra) << "</text>\n";
    }
}

std::string rule_text_of(const nlohmann::json& test) {
    if (!test.contains("rules")) return {};
    const auto& r = test["rules"];
    if (r.contains("text")) return r["text"].get<std::string>();
    return {};
}

}  // namespace

std::string render_hierarchy_svg(const nlohmann::json& report) {
    double alpha = report.at("config").value("alpha", 0.05);
    const auto& agg = report.at("aggregate");
    const auto& det = report.at("detailed");

    const double node_w = 230, node_h = 62, child_w = 140, child_h = 50;
    const double margin = 24, gap = 18, level_gap = 70;

    auto make_agg = [&](const nlohmann::json& t, const std::string& title) {
        Node n;
        n.title = title;
        double p = t.value("p_value", 1.0);
        n.hot = t.value("rejected", false);
        n.strength = "strength 1-p = " + fmt(1.0 - p) + (n.hot ? " (rejected)" : "");
        if (t.value("degenerate", false)) n.strength = "degenerate (p = 1)";
        std::string rt = rule_text_of(t);
        if (!rt.empty() && rt.size() <= 60) n.extra = rt;
        return n;
    };

    auto children_of = [&](const nlohmann::json& branch) {
        std::vector<Node> out;
        if (!branch.contains("tests")) return out;
        for (auto it = branch["tests"].begin(); it != branch["tests"].end(); ++it) {
            Node c;
            c.title = it.key();
            double p = it.value().value("p_value", 1.0);
            c.hot = p > alpha;  // flagged as potentially important
            c.strength = "strength p = " + fmt(p) + (c.hot ? " (flagged)" : "");
            out.push_back(c);
        }
        return out;
    };

    std::vector<Node> cov_kids = children_of(det.at("covariate"));
    std::vector<Node> out_kids = children_of(det.at("outcome"));

    auto block_w = [&](std::size_t k) {
        return std::max(node_w, k == 0 ? node_w : k * child_w + (k - 1) * gap);
    };
    double wL = block_w(cov_kids.size());
    double wR = block_w(out_kids.size());
    double width = margin + wL + 2 * margin + wR + margin;
    double height = margin + node_h + level_gap + child_h + margin + 24;

    Node covn = make_agg(agg.at("covariate"), "covariate shift (H0_X)");
    Node outn = make_agg(agg.at("outcome"), "outcome shift (H0_YX)");
    covn.x = margin + wL / 2 - node_w / 2;
    outn.x = margin + wL + 2 * margin + wR / 2 - node_w / 2;
    covn.y = outn.y = margin;

    auto layout_kids = [&](std::vector<Node>& kids, double left, double bw) {
        double total = kids.size() * child_w + (kids.empty() ? 0 : (kids.size() - 1) * gap);
        double x = left + (bw - total) / 2;
        for (auto& k : kids) {
            k.x = x;
            k.y = margin + node_h + level_gap;
            x += child_w + gap;
        }
    };
    layout_kids(cov_kids, margin, wL);
    layout_kids(out_kids, margin + wL + 2 * margin, wR);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << fmt(width, 1)
        << "\" height=\"" << fmt(height, 1) << "\" font-family=\"sans-serif\">\n";
    svg << "<rect x=\"0\" y=\"0\" width=\"" << fmt(width, 1) << "\" height=\"" << fmt(height, 1)
        << "\" fill=\"#ffffff\"/>\n";

    auto emit_edges = [&](const Node& parent, const std::vector<Node>& kids) {
        for (const auto& k : kids) {
            svg << "<line x1=\"" << fmt(parent.x + node_w / 2, 1) << "\" y1=\""
                << fmt(parent.y + node_h, 1) << "\" x2=\"" << fmt(k.x + child_w / 2, 1)
                << "\" y2=\"" << fmt(k.y, 1) << "\" stroke=\"#666666\"/>\n";
        }
    };
    emit_edges(covn, cov_kids);
    emit_edges(outn, out_kids);

    emit_node(svg, covn, node_w, node_h);
    emit_node(svg, outn, node_w, node_h);
    for (const auto& k : cov_kids) emit_node(svg, k, child_w, child_h);
    for (const auto& k : out_kids) emit_node(svg, k, child_w, child_h);

    svg << "<text x=\"" << fmt(margin, 1) << "\" y=\"" << fmt(height - 10, 1)
        << "\" font-size=\"10\" fill=\"#333333\">red = flagged; alpha = " << fmt(alpha, 3)
        << (report.value("forced_detailed", false) ? "; detailed stage forced" : "")
        << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

std::string render_text_summary(const nlohmann::json& report) {
    std::ostringstream out;
    double alpha = report.at("config").value("alpha", 0.05);
    const auto& dec = report.at("decomposition");
    out << "drift diagnosis summary (alpha = " << fmt(alpha) << ")\n";
    out << "average loss change: " << fmt(dec.value("total", 0.0), 4) << " = covariate "
        << fmt(dec.value("covariate_term", 0.0), 4) << " + outcome "
        << fmt(dec.value("outcome_term", 0.0), 4) << "\n\n";

    auto line = [&](const nlohmann::json& t) {
        out << t.value("hypothesis", std::string("?")) << ": estimate "
            << fmt(t.value("estimate", 0.0), 4) << ", p = " << fmt(t.value("p_value", 1.0), 4)
            << (t.value("rejected", false) ? " [rejected]" : "")
            << (t.value("degenerate", false) ? " [degenerate]" : "") << "\n";
        if (t.contains("rules") && t["rules"].contains("text"))
            out << "  subgroup: " << t["rules"]["text"].get<std::string>() << "\n";
        if (t.contains("subgroup")) {
            const auto& s = t["subgroup"];
            out << "  prevalence source/target: " << fmt(s.value("prevalence_source", 0.0))
                << " / " << fmt(s.value("prevalence_target", 0.0))
                << ", loss decay: " << fmt(s.value("decay", 0.0), 4) << "\n";
        }
    };

    out << "aggregate tests\n";
    line(report.at("aggregate").at("covariate"));
    line(report.at("aggregate").at("outcome"));

    auto branch = [&](const char* key, const char* label, const char* flag_label) {
        const auto& b = report.at("detailed").at(key);
        if (!b.contains("tests") || b["tests"].empty()) return;
        out << "\ndetailed " << label << " tests\n";
        for (auto it = b["tests"].begin(); it != b["tests"].end(); ++it) line(it.value());
        out << flag_label << " = {";
        bool first = true;
        for (const auto& f : b["flags"]) {
            if (!first) out << ", ";
            out << f.get<std::string>();
            first = false;
        }
        out << "}\n";
    };
    branch("covariate", "covariate", "S_hat^X");
    branch("outcome", "outcome", "S_hat^Y|X");
    return out.str();
}

}  // namespace driftdx

#include "hopac/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <optional>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hopac {

namespace {

bool parse_row(const std::string& line, std::vector<double>& out) {
    out.clear();
    std::size_t start = 0;
    while (start <= line.size()) {
        std::size_t end = line.find(',', start);
        if (end == std::string::npos) end = line.size();
        std::string cell = line.substr(start, end - start);
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t lead = cell.find_first_not_of(' ');
        cell = lead == std::string::npos ? std::string() : cell.substr(lead);
        double value = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) return false;
        out.push_back(value);
        start = end + 1;
    }
    return true;
}

}  // namespace

std::string format_double(double x) {
    char buf[32];
    const auto result = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, result.ptr);
}

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::string line;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        line.clear();
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c > 0) line += ',';
            line += format_double(m(r, c));
        }
        line += '\n';
        out << line;
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<double> data;
    std::vector<double> row;
    std::size_t cols = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (!parse_row(line, row)) {
            if (rows == 0 && line_no == 1) continue;
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": not a numeric row");
        }
        if (rows == 0) cols = row.size();
        if (row.size() != cols) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": ragged row");
        data.insert(data.end(), row.begin(), row.end());
        ++rows;
    }
    if (rows == 0) throw std::runtime_error(path.string() + ": no data rows");
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
    }
    return m;
}

nlohmann::json to_json(const Generator& g) {
    return {{"family", std::string(1, family_label(g.family()))}, {"theta", g.theta()}, {"beta", g.beta()}};
}

Generator generator_from_json(const nlohmann::json& j) {
    const Family family = parse_family(j.at("family").get<std::string>());
    return Generator(family, j.at("theta").get<double>(), j.value("beta", 1.0));
}

nlohmann::json to_json(const HacTree& tree) {
    nlohmann::json forks = nlohmann::json::array();
    const auto& shape = tree.shape();
    const int d = tree.dimension();
    for (int fork = 2 * d - 1; fork > d; --fork) {
        const auto& kids = shape.children(fork);
        forks.push_back({{"id", fork}, {"children", {kids[0], kids[1]}}, {"generator", to_json(tree.generator(fork))}});
    }
    return {{"d", d}, {"forks", forks}};
}

HacTree tree_from_json(const nlohmann::json& j) {
    const int d = j.at("d").get<int>();
    std::vector<TreeShape::ForkSpec> specs;
    std::vector<std::pair<int, Generator>> gens;
    for (const auto& f : j.at("forks")) {
        const auto children = f.at("children").get<std::vector<int>>();
        if (children.size() != 2) throw std::invalid_argument("only binary forks are supported");
        const int id = f.at("id").get<int>();
        specs.push_back({id, {children[0], children[1]}});
        gens.emplace_back(id, generator_from_json(f.at("generator")));
    }
    // TreeShape renumbers forks, so generators are placed by leaf set.
    const TreeShape raw(d, specs);
    std::vector<std::vector<int>> leaves(2 * d);
    for (int leaf = 1; leaf <= d; ++leaf) leaves[leaf] = {leaf};
    bool progress = true;
    while (progress) {
        progress = false;
        for (const auto& s : specs) {
            if (!leaves[s.id].empty()) continue;
            const auto& a = leaves[s.children[0]];
            const auto& b = leaves[s.children[1]];
            if (a.empty() || b.empty()) continue;
            auto& l = leaves[s.id];
            l = a;
            l.insert(l.end(), b.begin(), b.end());
            std::sort(l.begin(), l.end());
            progress = true;
        }
    }
    std::vector<std::optional<Generator>> ordered(d - 1);
    for (const auto& [id, g] : gens) {
        for (int fork = d + 1; fork < 2 * d; ++fork) {
            if (raw.descendant_leaves(fork) == leaves[id]) {
                ordered[fork - d - 1] = g;
                break;
            }
        }
    }
    std::vector<Generator> list;
    for (auto& g : ordered) {
        if (!g) throw std::invalid_argument("tree JSON: could not place a fork generator");
        list.push_back(*g);
    }
    return HacTree(raw, std::move(list));
}

nlohmann::json to_json(const FitReport& report) {
    nlohmann::json j = to_json(report.tree);
    j["estimator"] = estimator_tag(report.estimator);
    j["family"] = std::string(1, family_label(report.family));
    nlohmann::json forks = nlohmann::json::array();
    for (const auto& rec : report.forks) {
        nlohmann::json pairs = nlohmann::json::array();
        for (std::size_t k = 0; k < rec.pairs.size(); ++k) {
            const auto& p = rec.pairs[k];
            pairs.push_back({{"pair", {rec.pair_keys[k].first, rec.pair_keys[k].second}},
                             {"theta", p.theta},
                             {"beta", p.beta},
                             {"objective", p.objective},
                             {"iterations", p.iterations},
                             {"converged", p.converged},
                             {"on_boundary", p.on_boundary},
                             {"trace", p.trace}});
        }
        auto bound = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
        forks.push_back({{"id", rec.fork},
                         {"leaves", rec.leaves},
                         {"theta", rec.theta},
                         {"beta", rec.beta},
                         {"tau_structure", rec.tau_hat},
                         {"theta_range", {bound(rec.theta_range.lower), bound(rec.theta_range.upper)}},
                         {"beta_range", {bound(rec.beta_range.lower), bound(rec.beta_range.upper)}},
                         {"pair_count", rec.pairs.size()},
                         {"restriction", restriction_name(rec.restriction)},
                         {"trimmed", rec.trimmed},
                         {"boundary", rec.boundary},
                         {"converged", rec.converged},
                         {"pairs", pairs}});
    }
    j["diagnostics"] = forks;
    return j;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace hopac

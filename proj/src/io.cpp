#include "hedge/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace hedge {

namespace {

constexpr int kProblemFormatVersion = 1;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Eigen::VectorXd vector_from_json(const json& arr, double inf_sign) {
    Eigen::VectorXd out(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
        out[static_cast<long>(i)] = arr[i].is_null() ? inf_sign * kInf : arr[i].get<double>();
    return out;
}

json vector_to_json(const Eigen::VectorXd& v, bool infinities_as_null) {
    json arr = json::array();
    for (long i = 0; i < v.size(); ++i) {
        if (infinities_as_null && std::isinf(v[i]))
            arr.push_back(nullptr);
        else
            arr.push_back(v[i]);
    }
    return arr;
}

Eigen::MatrixXd matrix_from_triplets(const json& block, int cols) {
    const int rows = block.at("rows").get<int>();
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, cols);
    for (const auto& t : block.at("triplets")) {
        const int r = t.at(0).get<int>();
        const int c = t.at(1).get<int>();
        if (r < 0 || r >= rows || c < 0 || c >= cols)
            throw parse_error("problem file: triplet index out of range");
        out(r, c) = t.at(2).get<double>();
    }
    return out;
}

json matrix_to_triplets(const Eigen::MatrixXd& m) {
    json block;
    block["rows"] = m.rows();
    json triplets = json::array();
    for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c)
            if (m(r, c) != 0.0) triplets.push_back(json::array({r, c, m(r, c)}));
    block["triplets"] = std::move(triplets);
    return block;
}

}  // namespace

HydroParams hydro_params_from_json(const json& doc) {
    try {
        const int B = doc.at("B").get<int>();
        const int T = doc.at("T").get<int>();
        const std::uint64_t seed = doc.value("seed", std::uint64_t{0});
        HydroParams p = HydroParams::random(B, T, seed);
        auto vec = [&doc](const char* key, Eigen::VectorXd& target) {
            if (doc.contains(key)) target = vector_from_json(doc.at(key), 1.0);
        };
        vec("c_H", p.c_H);
        vec("D", p.D);
        vec("W_cap", p.W_cap);
        vec("W_1", p.W_1);
        vec("r_dry", p.r_dry);
        vec("r_wet", p.r_wet);
        if (doc.contains("c_E")) p.c_E = doc.at("c_E").get<double>();
        if (doc.contains("p_dry")) p.p_dry = doc.at("p_dry").get<double>();
        if (doc.contains("quad_reg")) p.quad_reg = doc.at("quad_reg").get<double>();
        p.validate();
        return p;
    } catch (const json::exception& e) {
        throw parse_error(std::string("hydro params: ") + e.what());
    }
}

json hydro_params_to_json(const HydroParams& p) {
    json doc;
    doc["B"] = p.B;
    doc["T"] = p.T;
    doc["seed"] = p.seed;
    doc["c_H"] = vector_to_json(p.c_H, false);
    doc["c_E"] = p.c_E;
    doc["D"] = vector_to_json(p.D, false);
    doc["W_cap"] = vector_to_json(p.W_cap, false);
    doc["W_1"] = vector_to_json(p.W_1, false);
    doc["r_dry"] = vector_to_json(p.r_dry, false);
    doc["r_wet"] = vector_to_json(p.r_wet, false);
    doc["p_dry"] = p.p_dry;
    doc["quad_reg"] = p.quad_reg;
    return doc;
}

std::pair<ScenarioTree, std::vector<QpScenarioProblem>> problem_from_json(const json& doc) {
    try {
        if (doc.value("version", kProblemFormatVersion) != kProblemFormatVersion)
            throw parse_error("problem file: unsupported version");
        if (doc.contains("hydro")) return build_hydro(hydro_params_from_json(doc.at("hydro")));

        std::vector<int> dims;
        for (const auto& d : doc.at("layout").at("stage_dims")) dims.push_back(d.get<int>());
        StageLayout layout(dims);

        const json& tj = doc.at("tree");
        Eigen::VectorXd probs = vector_from_json(tj.at("probabilities"), 1.0);
        std::vector<std::vector<std::vector<int>>> partitions;
        for (const auto& stage : tj.at("partitions")) {
            std::vector<std::vector<int>> bundles;
            for (const auto& bundle : stage) {
                std::vector<int> members;
                for (const auto& s : bundle) members.push_back(s.get<int>());
                bundles.push_back(std::move(members));
            }
            partitions.push_back(std::move(bundles));
        }
        ScenarioTree tree(std::move(probs), std::move(partitions), layout);

        std::vector<QpScenarioProblem> problems;
        for (const auto& sj : doc.at("scenarios")) {
            QpScenarioProblem p;
            p.n = layout.n;
            if (sj.contains("Q")) p.Q = matrix_from_triplets(sj.at("Q"), p.n);
            if (sj.contains("c")) p.c = vector_from_json(sj.at("c"), 1.0);
            if (sj.contains("A_eq")) p.A_eq = matrix_from_triplets(sj.at("A_eq"), p.n);
            if (sj.contains("b_eq")) p.b_eq = vector_from_json(sj.at("b_eq"), 1.0);
            if (sj.contains("A_in")) p.A_in = matrix_from_triplets(sj.at("A_in"), p.n);
            if (sj.contains("b_in")) p.b_in = vector_from_json(sj.at("b_in"), 1.0);
            if (sj.contains("lower")) p.lower = vector_from_json(sj.at("lower"), -1.0);
            if (sj.contains("upper")) p.upper = vector_from_json(sj.at("upper"), 1.0);
            p.finalize();
            problems.push_back(std::move(p));
        }
        if (static_cast<int>(problems.size()) != tree.num_scenarios())
            throw parse_error("problem file: scenario count does not match the tree");
        return {std::move(tree), std::move(problems)};
    } catch (const json::exception& e) {
        throw parse_error(std::string("problem file: ") + e.what());
    }
}

json problem_to_json(const ScenarioTree& tree, const std::vector<QpScenarioProblem>& problems) {
    json doc;
    doc["version"] = kProblemFormatVersion;
    doc["layout"]["stage_dims"] = tree.layout().stage_dims;
    doc["tree"]["probabilities"] = vector_to_json(tree.probabilities(), false);
    doc["tree"]["partitions"] = tree.partitions();
    json scenarios = json::array();
    for (const auto& p : problems) {
        json sj;
        if (!p.Q.isZero(0.0)) sj["Q"] = matrix_to_triplets(p.Q);
        sj["c"] = vector_to_json(p.c, false);
        if (p.num_eq() > 0) {
            sj["A_eq"] = matrix_to_triplets(p.A_eq);
            sj["b_eq"] = vector_to_json(p.b_eq, false);
        }
        if (p.num_in() > 0) {
            sj["A_in"] = matrix_to_triplets(p.A_in);
            sj["b_in"] = vector_to_json(p.b_in, false);
        }
        sj["lower"] = vector_to_json(p.lower, true);
        sj["upper"] = vector_to_json(p.upper, true);
        scenarios.push_back(std::move(sj));
    }
    doc["scenarios"] = std::move(scenarios);
    return doc;
}

std::pair<ScenarioTree, std::vector<QpScenarioProblem>> load_problem(const std::string& path) {
    json doc;
    try {
        doc = json::parse(read_text(path));
    } catch (const json::exception& e) {
        throw parse_error(std::string("problem file '") + path + "': " + e.what());
    }
    return problem_from_json(doc);
}

void save_problem(const std::string& path, const ScenarioTree& tree,
                  const std::vector<QpScenarioProblem>& problems) {
    write_text(path, problem_to_json(tree, problems).dump(2) + "\n");
}

SimSchedule schedule_from_json(const json& doc) {
    try {
        SimSchedule s;
        s.kind = doc.value("kind", s.kind);
        s.tick_seconds = doc.value("tick_seconds", s.tick_seconds);
        s.base_ticks = doc.value("base_ticks", s.base_ticks);
        if (doc.contains("slow_scenarios"))
            s.slow_scenarios = doc.at("slow_scenarios").get<std::vector<int>>();
        s.slow_extra_ticks = doc.value("slow_extra_ticks", s.slow_extra_ticks);
        if (doc.contains("trace")) s.trace = doc.at("trace").get<std::vector<long>>();
        s.seed = doc.value("seed", s.seed);
        s.jitter_ticks = doc.value("jitter_ticks", s.jitter_ticks);
        if (!(s.tick_seconds > 0.0)) throw parse_error("schedule: tick_seconds must be positive");
        return s;
    } catch (const json::exception& e) {
        throw parse_error(std::string("schedule: ") + e.what());
    }
}

json schedule_to_json(const SimSchedule& s) {
    json doc;
    doc["kind"] = s.kind;
    doc["tick_seconds"] = s.tick_seconds;
    doc["base_ticks"] = s.base_ticks;
    doc["slow_scenarios"] = s.slow_scenarios;
    doc["slow_extra_ticks"] = s.slow_extra_ticks;
    doc["trace"] = s.trace;
    doc["seed"] = s.seed;
    doc["jitter_ticks"] = s.jitter_ticks;
    return doc;
}

SimSchedule load_schedule(const std::string& path) {
    try {
        return schedule_from_json(json::parse(read_text(path)));
    } catch (const json::exception& e) {
        throw parse_error(std::string("schedule file '") + path + "': " + e.what());
    }
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out = "wall_time_s,iteration,n_subproblems,steplength,subopt_rel,feas_err\n";
    for (const auto& r : rows) {
        out += format_double(r.wall_time_s);
        out += ',';
        out += std::to_string(r.iteration);
        out += ',';
        out += std::to_string(r.n_subproblems);
        out += ',';
        out += format_double(r.steplength);
        out += ',';
        if (r.subopt_rel) out += format_double(*r.subopt_rel);
        out += ',';
        if (r.feas_err) out += format_double(*r.feas_err);
        out += '\n';
    }
    return out;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    write_text(path, metrics_csv(rows));
}

std::vector<MetricsRow> parse_metrics_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) ||
        line != "wall_time_s,iteration,n_subproblems,steplength,subopt_rel,feas_err")
        throw parse_error("metrics csv: bad header");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        while (fields.size() < 6) fields.emplace_back();
        if (fields.size() != 6) throw parse_error("metrics csv: wrong column count");
        MetricsRow r;
        r.wall_time_s = std::stod(fields[0]);
        r.iteration = std::stol(fields[1]);
        r.n_subproblems = std::stol(fields[2]);
        r.steplength = std::stod(fields[3]);
        if (!fields[4].empty()) r.subopt_rel = std::stod(fields[4]);
        if (!fields[5].empty()) r.feas_err = std::stod(fields[5]);
        rows.push_back(r);
    }
    return rows;
}

json solution_to_json(const RunRecord& record) {
    json doc;
    json x = json::array();
    for (int s = 0; s < record.x_final.rows(); ++s) {
        json row = json::array();
        for (int j = 0; j < record.x_final.cols(); ++j) row.push_back(record.x_final(s, j));
        x.push_back(std::move(row));
    }
    doc["x"] = std::move(x);
    doc["objective"] = record.objective;
    doc["termination"] = record.termination;
    doc["n_subproblems"] = record.n_subproblems;
    doc["iterations"] = record.iterations;
    if (record.delays.count > 0) {
        doc["tau_obs"] = record.delays.tau_obs;
        json hist = json::object();
        for (const auto& [delay, count] : record.delays.histogram)
            hist[std::to_string(delay)] = count;
        doc["delay_histogram"] = std::move(hist);
    }
    return doc;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw runtime_fault("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw runtime_fault("write failed for '" + path + "'");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw parse_error("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::uint64_t fnv1a(const std::string& data) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string content_hash_hex(const std::string& data) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(data)));
    return buf;
}

Reference reference_for(const std::string& problem_path, const ScenarioTree& tree,
                        const std::vector<QpScenarioProblem>& problems) {
    const std::string hash = content_hash_hex(read_text(problem_path));
    const std::string cache_path = problem_path + "." + hash + ".ref.json";
    if (std::filesystem::exists(cache_path)) {
        try {
            const json doc = json::parse(read_text(cache_path));
            Reference ref;
            ref.f_star = doc.at("f_star").get<double>();
            const json& x = doc.at("x_star");
            ref.x_star.resize(static_cast<long>(x.size()), tree.layout().n);
            for (std::size_t s = 0; s < x.size(); ++s)
                for (int j = 0; j < tree.layout().n; ++j)
                    ref.x_star(static_cast<long>(s), j) = x[s][j].get<double>();
            if (ref.x_star.rows() == tree.num_scenarios()) return ref;
        } catch (const std::exception&) {
            // fall through and recompute
        }
    }
    auto [x_star, f_star] = extensive_form(tree, problems);
    json doc;
    doc["f_star"] = f_star;
    json x = json::array();
    for (int s = 0; s < x_star.rows(); ++s) {
        json row = json::array();
        for (int j = 0; j < x_star.cols(); ++j) row.push_back(x_star(s, j));
        x.push_back(std::move(row));
    }
    doc["x_star"] = std::move(x);
    write_text(cache_path, doc.dump() + "\n");
    return Reference{std::move(x_star), f_star};
}

std::vector<QuartileRow> aggregate_runs(const std::vector<std::vector<MetricsRow>>& runs,
                                        double (*extract)(const MetricsRow&), int num_bins) {
    if (num_bins < 1) throw parse_error("aggregate_runs: need at least one bin");
    double t_min = kInf, t_max = 0.0;
    for (const auto& run : runs) {
        if (run.empty()) continue;
        t_min = std::min(t_min, run.front().wall_time_s);
        t_max = std::max(t_max, run.back().wall_time_s);
    }
    if (!std::isfinite(t_min)) return {};
    t_min = std::max(t_min, 1e-9);
    t_max = std::max(t_max, t_min * (1.0 + 1e-12));

    auto percentile = [](std::vector<double>& v, double p) {
        std::sort(v.begin(), v.end());
        const double idx = p * static_cast<double>(v.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(idx);
        const std::size_t hi = std::min(lo + 1, v.size() - 1);
        const double frac = idx - static_cast<double>(lo);
        return v[lo] * (1.0 - frac) + v[hi] * frac;
    };

    std::vector<QuartileRow> out;
    for (int b = 0; b < num_bins; ++b) {
        const double frac = static_cast<double>(b + 1) / num_bins;
        const double edge = t_min * std::pow(t_max / t_min, frac);
        std::vector<double> values;
        for (const auto& run : runs) {
            double last = std::numeric_limits<double>::quiet_NaN();
            for (const auto& row : run) {
                if (row.wall_time_s > edge) break;
                const double v = extract(row);
                if (!std::isnan(v)) last = v;
            }
            if (!std::isnan(last)) values.push_back(last);
        }
        if (values.empty()) continue;
        QuartileRow row;
        row.t = edge;
        row.n = static_cast<long>(values.size());
        row.q1 = percentile(values, 0.25);
        row.med = percentile(values, 0.5);
        row.q3 = percentile(values, 0.75);
        out.push_back(row);
    }
    return out;
}

std::string quartiles_csv(const std::vector<QuartileRow>& rows, const std::string& metric_name) {
    std::string out = "t," + metric_name + "_q1," + metric_name + "_med," + metric_name +
                      "_q3,n\n";
    for (const auto& r : rows) {
        out += format_double(r.t);
        out += ',';
        out += format_double(r.q1);
        out += ',';
        out += format_double(r.med);
        out += ',';
        out += format_double(r.q3);
        out += ',';
        out += std::to_string(r.n);
        out += '\n';
    }
    return out;
}

}  // namespace hedge

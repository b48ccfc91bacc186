#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "abplan/errors.hpp"
#include "abplan/estimators.hpp"
#include "abplan/model.hpp"
#include "abplan/planner.hpp"
#include "abplan/sim.hpp"
#include "abplan/utc.hpp"

namespace abplan::io {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Formatting and file helpers
// ---------------------------------------------------------------------------

// Full precision for machine artifacts.
inline std::string format_full(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// 4 significant digits for human summaries.
inline std::string format_human(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad())
        throw io_error("read failed for " + path);
    return ss.str();
}

// Writes the whole content in one call so downstream readers never see a
// partially written artifact.
inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw io_error("cannot open " + path + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out)
        throw io_error("write failed for " + path);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_double(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(context + ": cannot parse number '" + s + "'");
    }
}

inline long parse_long(const std::string& s, const std::string& context) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument(context + ": cannot parse integer '" + s + "'");
    }
}

inline int parse_arm(const std::string& s, const std::string& context) {
    if (s == "treatment") return model::arm_index(model::Arm::treatment);
    if (s == "control") return model::arm_index(model::Arm::control);
    throw std::invalid_argument(context + ": arm must be 'treatment' or 'control', got '" + s + "'");
}

// Splits text into lines and checks the header.
inline std::vector<std::string> csv_lines(const std::string& text, const std::string& context) {
    std::vector<std::string> lines;
    std::string cur;
    for (char ch : text) {
        if (ch == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.empty())
        throw std::invalid_argument(context + ": empty input");
    return lines;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Panel CSV: user_id,day,arm,value  |  user_id,day,arm,numerator,denominator
// ---------------------------------------------------------------------------

inline std::string panel_to_csv(const model::MetricPanel& panel) {
    std::string out;
    out.reserve(static_cast<std::size_t>(panel.n_users) * panel.n_days * 40);
    out += panel.is_ratio() ? "user_id,day,arm,numerator,denominator\n" : "user_id,day,arm,value\n";
    static const char* arm_name[model::kArms] = {"treatment", "control"};
    for (int a = 0; a < model::kArms; ++a)
        for (int u = 0; u < panel.n_users; ++u)
            for (int d = 0; d < panel.n_days; ++d) {
                const std::size_t i = (static_cast<std::size_t>(a) * panel.n_days + d) * panel.n_users + u;
                out += std::to_string(u);
                out += ',';
                out += std::to_string(d + 1);
                out += ',';
                out += arm_name[a];
                out += ',';
                out += format_full(panel.value[i]);
                if (panel.is_ratio()) {
                    out += ',';
                    out += format_full(panel.denom[i]);
                }
                out += '\n';
            }
    return out;
}

inline model::MetricPanel panel_from_csv_text(const std::string& text) {
    const auto lines = detail::csv_lines(text, "panel csv");
    const auto header = detail::split_csv_line(lines[0]);
    bool ratio;
    if (header == std::vector<std::string>{"user_id", "day", "arm", "value"}) {
        ratio = false;
    } else if (header == std::vector<std::string>{"user_id", "day", "arm", "numerator", "denominator"}) {
        ratio = true;
    } else {
        throw std::invalid_argument("panel csv: unrecognized header '" + lines[0] + "'");
    }

    struct Row {
        int user, day, arm;
        double v, d;
    };
    std::vector<Row> rows;
    rows.reserve(lines.size() - 1);
    int max_user = -1, max_day = 0;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto f = detail::split_csv_line(lines[li]);
        const std::string ctx = "panel csv line " + std::to_string(li + 1);
        if (f.size() != (ratio ? 5u : 4u))
            throw std::invalid_argument(ctx + ": wrong field count");
        Row row{};
        row.user = static_cast<int>(detail::parse_long(f[0], ctx));
        row.day = static_cast<int>(detail::parse_long(f[1], ctx));
        row.arm = detail::parse_arm(f[2], ctx);
        row.v = detail::parse_double(f[3], ctx);
        row.d = ratio ? detail::parse_double(f[4], ctx) : 0.0;
        if (row.user < 0)
            throw std::invalid_argument(ctx + ": user_id must be >= 0");
        if (row.day < 1)
            throw std::invalid_argument(ctx + ": day must be >= 1");
        max_user = std::max(max_user, row.user);
        max_day = std::max(max_day, row.day);
        rows.push_back(row);
    }

    model::MetricPanel panel;
    panel.n_users = max_user + 1;
    panel.n_days = max_day;
    const std::size_t cells = static_cast<std::size_t>(model::kArms) * panel.n_days * panel.n_users;
    panel.value.assign(cells, 0.0);
    if (ratio) panel.denom.assign(cells, 0.0);
    std::vector<char> seen(cells, 0);
    for (const auto& row : rows) {
        const std::size_t i =
            (static_cast<std::size_t>(row.arm) * panel.n_days + (row.day - 1)) * panel.n_users + row.user;
        if (seen[i])
            throw std::invalid_argument("panel csv: duplicate cell (user " + std::to_string(row.user) +
                                        ", day " + std::to_string(row.day) + ")");
        seen[i] = 1;
        panel.value[i] = row.v;
        if (ratio) panel.denom[i] = row.d;
    }
    for (std::size_t i = 0; i < cells; ++i)
        if (!seen[i])
            throw std::invalid_argument("panel csv: missing cells; the panel must be rectangular");
    return panel;
}

inline model::MetricPanel read_panel_csv(const std::string& path) {
    return panel_from_csv_text(read_file(path));
}

// ---------------------------------------------------------------------------
// Pre-period CSV: user_id,arm,pre_mean
// ---------------------------------------------------------------------------

inline std::string pre_period_to_csv(const model::PrePeriodPanel& pre) {
    std::string out = "user_id,arm,pre_mean\n";
    static const char* arm_name[model::kArms] = {"treatment", "control"};
    for (int a = 0; a < model::kArms; ++a)
        for (int u = 0; u < pre.n_users; ++u) {
            out += std::to_string(u);
            out += ',';
            out += arm_name[a];
            out += ',';
            out += format_full(pre.pre_mean[static_cast<std::size_t>(a) * pre.n_users + u]);
            out += '\n';
        }
    return out;
}

inline model::PrePeriodPanel pre_period_from_csv_text(const std::string& text) {
    const auto lines = detail::csv_lines(text, "pre-period csv");
    if (detail::split_csv_line(lines[0]) != std::vector<std::string>{"user_id", "arm", "pre_mean"})
        throw std::invalid_argument("pre-period csv: unrecognized header '" + lines[0] + "'");
    struct Row {
        int user, arm;
        double v;
    };
    std::vector<Row> rows;
    int max_user = -1;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto f = detail::split_csv_line(lines[li]);
        const std::string ctx = "pre-period csv line " + std::to_string(li + 1);
        if (f.size() != 3)
            throw std::invalid_argument(ctx + ": wrong field count");
        Row row{};
        row.user = static_cast<int>(detail::parse_long(f[0], ctx));
        row.arm = detail::parse_arm(f[1], ctx);
        row.v = detail::parse_double(f[2], ctx);
        if (row.user < 0)
            throw std::invalid_argument(ctx + ": user_id must be >= 0");
        max_user = std::max(max_user, row.user);
        rows.push_back(row);
    }
    model::PrePeriodPanel pre;
    pre.n_users = max_user + 1;
    pre.t0_days = 0;  // not recorded in the CSV
    pre.pre_mean.assign(static_cast<std::size_t>(model::kArms) * pre.n_users, 0.0);
    std::vector<char> seen(pre.pre_mean.size(), 0);
    for (const auto& row : rows) {
        const std::size_t i = static_cast<std::size_t>(row.arm) * pre.n_users + row.user;
        if (seen[i])
            throw std::invalid_argument("pre-period csv: duplicate user " + std::to_string(row.user));
        seen[i] = 1;
        pre.pre_mean[i] = row.v;
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
        if (!seen[i])
            throw std::invalid_argument("pre-period csv: missing users; both arms need every user");
    return pre;
}

inline model::PrePeriodPanel read_pre_period_csv(const std::string& path) {
    return pre_period_from_csv_text(read_file(path));
}

// ---------------------------------------------------------------------------
// Width-series CSV: experiment_id,day,ci_width
// ---------------------------------------------------------------------------

inline std::string width_series_to_csv(const std::vector<utc::WidthSeries>& series) {
    std::string out = "experiment_id,day,ci_width\n";
    for (const auto& s : series)
        for (const auto& p : s.points) {
            out += s.experiment_id;
            out += ',';
            out += std::to_string(p.day);
            out += ',';
            out += format_full(p.width);
            out += '\n';
        }
    return out;
}

inline std::vector<utc::WidthSeries> width_series_from_csv_text(const std::string& text) {
    const auto lines = detail::csv_lines(text, "width csv");
    if (detail::split_csv_line(lines[0]) != std::vector<std::string>{"experiment_id", "day", "ci_width"})
        throw std::invalid_argument("width csv: unrecognized header '" + lines[0] + "'");
    std::vector<utc::WidthSeries> series;
    std::map<std::string, std::size_t> index;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        const auto f = detail::split_csv_line(lines[li]);
        const std::string ctx = "width csv line " + std::to_string(li + 1);
        if (f.size() != 3)
            throw std::invalid_argument(ctx + ": wrong field count");
        const auto [it, fresh] = index.try_emplace(f[0], series.size());
        if (fresh) series.push_back(utc::WidthSeries{f[0], {}});
        series[it->second].points.push_back(
            {static_cast<int>(detail::parse_long(f[1], ctx)), detail::parse_double(f[2], ctx)});
    }
    for (auto& s : series) s.validate();
    return series;
}

inline std::vector<utc::WidthSeries> read_width_series_csv(const std::string& path) {
    return width_series_from_csv_text(read_file(path));
}

// ---------------------------------------------------------------------------
// Report CSVs
// ---------------------------------------------------------------------------

inline std::string decay_rows_to_csv(const std::vector<sim::DecayRow>& rows) {
    std::string out = "t,empirical_width,predicted_width,rel_gap,coverage\n";
    for (const auto& row : rows) {
        out += std::to_string(row.t);
        out += ',';
        out += format_full(row.empirical_width);
        out += ',';
        out += format_full(row.predicted_width);
        out += ',';
        out += format_full(row.rel_gap);
        out += ',';
        out += format_full(row.coverage);
        out += '\n';
    }
    return out;
}

inline std::string coverage_report_to_csv(const sim::CoverageReport& report) {
    std::string out = "t,coverage,mean_ci_width\n";
    for (const auto& row : report.rows) {
        out += std::to_string(row.t);
        out += ',';
        out += format_full(row.coverage);
        out += ',';
        out += format_full(row.mean_ci_width);
        out += '\n';
    }
    return out;
}

inline std::string design_comparison_to_csv(const planner::DesignComparison& cmp) {
    std::string out = "t,se_user_plain,se_user_prepost,se_userday\n";
    for (std::size_t i = 0; i < cmp.se_user_plain.size(); ++i) {
        out += std::to_string(i + 1);
        out += ',';
        out += format_full(cmp.se_user_plain[i]);
        out += ',';
        out += cmp.prepost_defined() ? format_full(cmp.se_user_prepost[i]) : std::string();
        out += ',';
        out += format_full(cmp.se_userday[i]);
        out += '\n';
    }
    return out;
}

inline std::string power_curve_to_csv(const std::vector<planner::PowerPoint>& curve) {
    std::string out = "t,predicted_width\n";
    for (const auto& p : curve) {
        out += std::to_string(p.t);
        out += ',';
        out += format_full(p.predicted_width);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON: experiment configuration
// ---------------------------------------------------------------------------

struct ExperimentConfig {
    model::ModelParams params;
    model::ExperimentDesign design;
    std::uint64_t seed = 1;
};

namespace detail {

inline const json& require_key(const json& j, const std::string& key) {
    const auto it = j.find(key);
    if (it == j.end())
        throw std::invalid_argument("config: missing key '" + key + "'");
    return *it;
}

template <class T>
T get_as(const json& j, const std::string& key) {
    try {
        return require_key(j, key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config: key '" + key + "' has the wrong type");
    }
}

template <class T>
T get_or(const json& j, const std::string& key, T fallback) {
    const auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config: key '" + key + "' has the wrong type");
    }
}

}  // namespace detail

inline json ratio_part_to_json(const formulas::RatioVarianceComponents& r) {
    return json{{"sigma_a2_n", r.sigma_a2_n}, {"sigma_a2_d", r.sigma_a2_d},
                {"sigma_a_nd", r.sigma_a_nd}, {"sigma_e2_n", r.sigma_e2_n},
                {"sigma_e2_d", r.sigma_e2_d}, {"sigma_e_nd", r.sigma_e_nd},
                {"mbar_n", r.mbar_n},         {"mbar_d", r.mbar_d}};
}

inline formulas::RatioVarianceComponents ratio_part_from_json(const json& j) {
    formulas::RatioVarianceComponents r;
    r.sigma_a2_n = detail::get_as<double>(j, "sigma_a2_n");
    r.sigma_a2_d = detail::get_as<double>(j, "sigma_a2_d");
    r.sigma_a_nd = detail::get_as<double>(j, "sigma_a_nd");
    r.sigma_e2_n = detail::get_as<double>(j, "sigma_e2_n");
    r.sigma_e2_d = detail::get_as<double>(j, "sigma_e2_d");
    r.sigma_e_nd = detail::get_as<double>(j, "sigma_e_nd");
    r.mbar_n = detail::get_as<double>(j, "mbar_n");
    r.mbar_d = detail::get_as<double>(j, "mbar_d");
    return r;
}

inline json experiment_config_to_json(const ExperimentConfig& cfg) {
    json j;
    j["theta"] = cfg.params.theta;
    j["daily_means_c"] = cfg.params.daily_means_c;
    j["sigma_a2"] = cfg.params.sigma.sigma_a2;
    j["sigma_e2"] = cfg.params.sigma.sigma_e2;
    j["ratio_part"] = cfg.params.ratio_part ? ratio_part_to_json(*cfg.params.ratio_part) : json(nullptr);
    j["error_distribution"] =
        cfg.params.error_distribution == model::ErrorDistribution::gaussian ? "gaussian"
                                                                            : "shifted_lognormal";
    j["n_per_arm"] = cfg.design.n_per_arm;
    j["t_days"] = cfg.design.t_days;
    j["t0_days"] = cfg.design.t0_days;
    j["diversion"] = cfg.design.diversion == model::Diversion::user ? "user" : "user-day";
    j["buckets"] = cfg.design.buckets ? json(*cfg.design.buckets) : json(nullptr);
    j["seed"] = cfg.seed;
    return j;
}

inline ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig cfg;
    cfg.design.n_per_arm = detail::get_as<int>(j, "n_per_arm");
    cfg.design.t_days = detail::get_as<int>(j, "t_days");
    cfg.design.t0_days = detail::get_or<int>(j, "t0_days", 0);
    const std::string diversion = detail::get_or<std::string>(j, "diversion", "user");
    if (diversion == "user") {
        cfg.design.diversion = model::Diversion::user;
    } else if (diversion == "user-day") {
        cfg.design.diversion = model::Diversion::user_day;
    } else {
        throw std::invalid_argument("config: diversion must be 'user' or 'user-day'");
    }
    if (j.contains("buckets") && !j["buckets"].is_null())
        cfg.design.buckets = detail::get_as<int>(j, "buckets");

    cfg.params.theta = detail::get_as<double>(j, "theta");
    cfg.params.sigma.sigma_a2 = detail::get_as<double>(j, "sigma_a2");
    cfg.params.sigma.sigma_e2 = detail::get_as<double>(j, "sigma_e2");
    const std::string dist = detail::get_or<std::string>(j, "error_distribution", "gaussian");
    if (dist == "gaussian") {
        cfg.params.error_distribution = model::ErrorDistribution::gaussian;
    } else if (dist == "shifted_lognormal") {
        cfg.params.error_distribution = model::ErrorDistribution::shifted_lognormal;
    } else {
        throw std::invalid_argument(
            "config: error_distribution must be 'gaussian' or 'shifted_lognormal'");
    }

    if (j.contains("ratio_part") && !j["ratio_part"].is_null())
        cfg.params.ratio_part = ratio_part_from_json(j["ratio_part"]);

    if (!cfg.params.ratio_part) {
        const json& means = detail::require_key(j, "daily_means_c");
        if (means.is_array()) {
            cfg.params.daily_means_c = means.get<std::vector<double>>();
        } else if (means.is_object()) {
            // Convenience: {"base": B, "weekly_amplitude": A} expands to the
            // weekly sinusoid over the configured days.
            cfg.params.daily_means_c = model::weekly_sinusoid_means(
                detail::get_as<double>(means, "base"),
                detail::get_or<double>(means, "weekly_amplitude", 0.0), cfg.design.t_days,
                cfg.design.t0_days);
        } else {
            throw std::invalid_argument("config: daily_means_c must be an array or an object");
        }
    }

    cfg.seed = detail::get_or<std::uint64_t>(j, "seed", 1);
    return cfg;
}

inline json parse_json_text(const std::string& text, const std::string& context) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(context + ": not valid JSON: " + e.what());
    }
}

// ---------------------------------------------------------------------------
// JSON: simulation / validation configuration
// ---------------------------------------------------------------------------

struct ValidateConfig {
    sim::SimConfig sim;
    double decay_tolerance = 0.02;     // absolute gap on normalized widths
    double coverage_lo = 0.935;        // acceptable band for 95% CIs
    double coverage_hi = 0.965;
    int coverage_replications = 2000;
    int coverage_t_days = 0;           // 0 = min(7, t_days)
    bool run_decay = true;
    bool run_coverage = true;
};

inline sim::SimConfig sim_config_from_json(const json& j) {
    sim::SimConfig cfg;
    const ExperimentConfig base = experiment_config_from_json(j);
    cfg.params = base.params;
    cfg.design = base.design;
    cfg.seed = base.seed;
    cfg.replications = detail::get_or<int>(j, "replications", 500);
    cfg.alpha = detail::get_or<double>(j, "alpha", 0.05);
    if (j.contains("rho_predicted") && !j["rho_predicted"].is_null())
        cfg.rho_predicted = detail::get_as<double>(j, "rho_predicted");
    return cfg;
}

inline ValidateConfig validate_config_from_json(const json& j) {
    ValidateConfig cfg;
    cfg.sim = sim_config_from_json(j);
    cfg.decay_tolerance = detail::get_or<double>(j, "decay_tolerance", cfg.decay_tolerance);
    cfg.coverage_lo = detail::get_or<double>(j, "coverage_lo", cfg.coverage_lo);
    cfg.coverage_hi = detail::get_or<double>(j, "coverage_hi", cfg.coverage_hi);
    cfg.coverage_replications =
        detail::get_or<int>(j, "coverage_replications", cfg.coverage_replications);
    cfg.coverage_t_days = detail::get_or<int>(j, "coverage_t_days", cfg.coverage_t_days);
    if (j.contains("outputs") && !j["outputs"].is_null()) {
        const auto outputs = detail::get_as<std::vector<std::string>>(j, "outputs");
        cfg.run_decay = cfg.run_coverage = false;
        for (const auto& o : outputs) {
            if (o == "decay") {
                cfg.run_decay = true;
            } else if (o == "coverage") {
                cfg.run_coverage = true;
            } else {
                throw std::invalid_argument("config: unknown output '" + o + "'");
            }
        }
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// JSON: estimates
// ---------------------------------------------------------------------------

inline json estimate_to_json(const estimators::EffectEstimate& est,
                             const estimators::ConfidenceInterval& ci) {
    return json{{"theta_hat", est.theta_hat},
                {"variance_hat", est.variance_hat ? json(*est.variance_hat) : json(nullptr)},
                {"ci_lower", ci.lower},
                {"ci_upper", ci.upper},
                {"alpha", ci.alpha},
                {"n_per_arm", est.n_per_arm},
                {"t_days", est.t_days},
                {"method", est.method == estimators::Method::plain ? "plain" : "prepost"},
                {"variance_method",
                 est.variance_method == estimators::VarianceMethod::plugin ? "plugin" : "jackknife"}};
}

inline json utc_estimate_to_json(const utc::UTCEstimate& est) {
    return json{{"rho_hat", est.rho_hat},
                {"method", utc::to_string(est.method)},
                {"n_experiments", est.n_experiments},
                {"max_lag", est.max_lag ? json(*est.max_lag) : json(nullptr)},
                {"clamped_fraction", est.clamped_fraction}};
}

inline json design_summary_to_json(const planner::DesignComparison& cmp) {
    return json{{"rho", cmp.rho},
                {"t0_days", cmp.t0_days},
                {"crossover_t", cmp.crossover_t ? json(*cmp.crossover_t) : json(nullptr)},
                {"prepost_defined", cmp.prepost_defined()}};
}

}  // namespace abplan::io

#include "hts/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "hts/errors.hpp"
#include "hts/log.hpp"

namespace hts {

using nlohmann::json;
namespace fs = std::filesystem;

// Dates ---------------------------------------------------------------------

Date parse_iso_date(const std::string& text) {
    int y = 0;
    unsigned m = 0, d = 0;
    char dash1 = 0, dash2 = 0;
    std::istringstream in(text);
    if (text.size() != 10 || !(in >> y >> dash1 >> m >> dash2 >> d) || dash1 != '-' || dash2 != '-')
        throw data_error("BadDate", fmt::format("'{}' is not an ISO-8601 date (YYYY-MM-DD)", text));
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) throw data_error("BadDate", fmt::format("'{}' is not a valid calendar date", text));
    return std::chrono::sys_days{ymd};
}

std::string format_iso_date(Date d) {
    const std::chrono::year_month_day ymd{d};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()));
}

Date CalendarConfig::origin() const {
    const std::chrono::weekday wd{start};
    return start - (wd - week_start);
}

int CalendarConfig::week_of(Date d) const {
    const auto days = (d - origin()).count();
    return static_cast<int>(days >= 0 ? days / 7 : -((-days + 6) / 7));
}

std::size_t JobConfig::training_length(int weeks) const {
    long long n = 0;
    if (train_weeks)
        n = static_cast<long long>(*train_weeks);
    else if (train_end)
        n = calendar.week_of(*train_end) + 1;
    else
        n = static_cast<long long>(weeks) - horizon;
    if (n < 1 || n > weeks)
        throw config_error("InvalidSplit", fmt::format("training span of {} weeks is outside the {}-week calendar", n,
                                                       weeks));
    return static_cast<std::size_t>(n);
}

// Config --------------------------------------------------------------------

namespace {

std::chrono::weekday parse_weekday(const std::string& name) {
    static const std::map<std::string, unsigned> names{{"sunday", 0},   {"monday", 1}, {"tuesday", 2},
                                                       {"wednesday", 3}, {"thursday", 4}, {"friday", 5},
                                                       {"saturday", 6}};
    auto it = names.find(name);
    if (it == names.end()) throw config_error("InvalidConfig", fmt::format("unknown week_start '{}'", name));
    return std::chrono::weekday{it->second};
}

std::string weekday_name(std::chrono::weekday wd) {
    static const char* names[] = {"sunday", "monday", "tuesday", "wednesday", "thursday", "friday", "saturday"};
    return names[wd.c_encoding()];
}

}  // namespace

JobConfig parse_config(const json& doc) {
    try {
        JobConfig c;
        if (!doc.is_object()) throw config_error("InvalidConfig", "config must be a JSON object");

        std::vector<Attribute> attrs;
        for (const auto& a : doc.at("schema")) attrs.push_back({a.at("name").get<std::string>(),
                                                                a.at("values").get<std::vector<std::string>>()});
        c.schema = AttributeSchema(std::move(attrs));
        c.levels = doc.at("levels").get<std::vector<std::vector<std::string>>>();
        if (c.levels.empty()) throw config_error("InvalidConfig", "levels must be non-empty");
        for (const auto& level : c.levels)
            for (const auto& name : level) (void)c.schema.index_of(name);

        const auto& cal = doc.at("calendar");
        c.calendar.start = parse_iso_date(cal.at("start").get<std::string>());
        c.calendar.week_start = parse_weekday(cal.value("week_start", std::string("sunday")));
        if (cal.contains("weeks") && !cal["weeks"].is_null()) {
            c.calendar.weeks = cal["weeks"].get<int>();
            if (*c.calendar.weeks < 1) throw config_error("InvalidConfig", "calendar.weeks must be >= 1");
        }

        c.period = doc.value("period", 52);
        if (c.period < 1) throw config_error("InvalidConfig", "period must be >= 1");

        const auto& split = doc.at("split");
        c.horizon = split.value("horizon", 4);
        if (c.horizon < 1) throw config_error("InvalidConfig", "split.horizon must be >= 1");
        if (split.contains("train_weeks")) {
            const auto tw = split["train_weeks"].get<long long>();
            if (tw < 1) throw config_error("InvalidConfig", "split.train_weeks must be >= 1");
            c.train_weeks = static_cast<std::size_t>(tw);
        }
        if (split.contains("train_end")) c.train_end = parse_iso_date(split["train_end"].get<std::string>());

        if (doc.contains("transform")) {
            const auto& t = doc["transform"];
            c.transform.kind = parse_transform(t.value("policy", std::string("none")));
            c.transform.shift = t.value("shift", 0.0);
        }
        if (doc.contains("search")) {
            const auto& s = doc["search"];
            c.search.max_p = s.value("max_p", 3);
            c.search.max_q = s.value("max_q", 3);
            c.search.max_P = s.value("max_P", 1);
            c.search.max_Q = s.value("max_Q", 1);
            if (std::min({c.search.max_p, c.search.max_q, c.search.max_P, c.search.max_Q}) < 0)
                throw config_error("InvalidConfig", "search bounds must be non-negative");
            c.search.criterion = parse_criterion(s.value("criterion", std::string("aicc")));
            if (s.contains("include_intercept") && !s["include_intercept"].is_null())
                c.search.include_intercept = s["include_intercept"].get<bool>();
        }
        if (doc.contains("methods")) {
            c.methods.clear();
            for (const auto& m : doc["methods"]) c.methods.push_back(parse_method(m.get<std::string>()));
            if (c.methods.empty()) throw config_error("InvalidConfig", "methods must be non-empty");
        }
        c.seed = doc.value("seed", std::uint64_t{42});
        c.jobs = std::max(1U, doc.value("jobs", 1U));
        return c;
    } catch (const json::exception& e) {
        throw config_error("InvalidConfig", fmt::format("config: {}", e.what()));
    }
}

JobConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("InvalidConfig", fmt::format("cannot open config '{}'", path.string()));
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw config_error("InvalidConfig", fmt::format("config '{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return parse_config(doc);
}

json to_json(const JobConfig& c) {
    json doc;
    doc["schema"] = json::array();
    for (const auto& a : c.schema.attributes()) doc["schema"].push_back({{"name", a.name}, {"values", a.values}});
    doc["levels"] = c.levels;
    doc["calendar"] = {{"start", format_iso_date(c.calendar.start)}, {"week_start", weekday_name(c.calendar.week_start)}};
    if (c.calendar.weeks) doc["calendar"]["weeks"] = *c.calendar.weeks;
    doc["period"] = c.period;
    doc["split"] = {{"horizon", c.horizon}};
    if (c.train_weeks) doc["split"]["train_weeks"] = *c.train_weeks;
    if (c.train_end) doc["split"]["train_end"] = format_iso_date(*c.train_end);
    doc["transform"] = {{"policy", to_string(c.transform.kind)}, {"shift", c.transform.shift}};
    doc["search"] = {{"max_p", c.search.max_p},
                     {"max_q", c.search.max_q},
                     {"max_P", c.search.max_P},
                     {"max_Q", c.search.max_Q},
                     {"criterion", to_string(c.search.criterion)}};
    if (c.search.include_intercept) doc["search"]["include_intercept"] = *c.search.include_intercept;
    doc["methods"] = json::array();
    for (auto m : c.methods) doc["methods"].push_back(config_name(m));
    doc["seed"] = c.seed;
    doc["jobs"] = c.jobs;
    return doc;
}

// CSV -------------------------------------------------------------------------

namespace {

std::string trim(std::string s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(trim(cur));
    return out;
}

bool blank(const std::string& line) { return trim(line).empty(); }

std::map<std::string, std::size_t> header_index(const std::vector<std::string>& header) {
    std::map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < header.size(); ++i) idx.emplace(header[i], i);
    return idx;
}

std::size_t require_column(const std::map<std::string, std::size_t>& idx, const std::string& name,
                           const std::string& file) {
    auto it = idx.find(name);
    if (it == idx.end()) throw data_error("MissingColumn", fmt::format("{}: missing column '{}'", file, name));
    return it->second;
}

}  // namespace

std::vector<SalesRecord> parse_sales_csv(std::istream& in, const AttributeSchema& schema) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!blank(line)) break;
    }
    if (blank(line)) throw data_error("EmptyFile", "sales file has no header row");
    const auto header = split_csv_line(line);
    const auto idx = header_index(header);
    const auto date_col = require_column(idx, "date", "sales file");
    const auto qty_col = require_column(idx, "quantity", "sales file");
    std::vector<std::size_t> attr_cols;
    std::set<std::size_t> used{date_col, qty_col};
    for (const auto& a : schema.attributes()) {
        attr_cols.push_back(require_column(idx, a.name, "sales file"));
        used.insert(attr_cols.back());
    }
    for (std::size_t i = 0; i < header.size(); ++i)
        if (!used.count(i)) warn(fmt::format("sales file: ignoring extra column '{}'", header[i]));

    std::vector<SalesRecord> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (blank(line)) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw data_error("BadRow", fmt::format("row {}: expected {} fields, found {}", line_no, header.size(),
                                                   fields.size()));
        SalesRecord r;
        try {
            r.date = parse_iso_date(fields[date_col]);
        } catch (const Error&) {
            throw data_error("BadDate", fmt::format("row {}: bad date '{}'", line_no, fields[date_col]));
        }
        const auto& qtext = fields[qty_col];
        double q = 0.0;
        std::size_t consumed = 0;
        try {
            q = std::stod(qtext, &consumed);
        } catch (const std::exception&) {
            consumed = 0;
        }
        if (qtext.empty() || consumed != qtext.size() || !std::isfinite(q) || q < 0.0)
            throw data_error("BadQuantity", fmt::format("row {}: quantity '{}' is not a finite non-negative number",
                                                        line_no, qtext));
        r.quantity = q;
        for (std::size_t a = 0; a < attr_cols.size(); ++a) {
            const auto& v = fields[attr_cols[a]];
            if (!schema.admits(a, v))
                throw data_error("KeyOutsideSchema", fmt::format("row {}: value '{}' not allowed for '{}'", line_no, v,
                                                                 schema.attributes()[a].name));
            r.attributes.push_back(v);
        }
        out.push_back(std::move(r));
    }
    if (out.empty()) throw data_error("EmptyFile", "sales file has a header but no data rows");
    return out;
}

std::vector<SalesRecord> parse_sales_csv(const fs::path& path, const AttributeSchema& schema) {
    std::ifstream in(path);
    if (!in) throw data_error("EmptyFile", fmt::format("cannot open data file '{}'", path.string()));
    return parse_sales_csv(in, schema);
}

void write_sales_csv(const fs::path& path, const AttributeSchema& schema, const std::vector<SalesRecord>& sales) {
    std::ofstream out(path);
    if (!out) throw data_error("WriteFailed", fmt::format("cannot write '{}'", path.string()));
    out << "date";
    for (const auto& a : schema.attributes()) out << ',' << a.name;
    out << ",quantity\n";
    for (const auto& r : sales) {
        out << format_iso_date(r.date);
        for (const auto& v : r.attributes) out << ',' << v;
        out << ',' << format_number(r.quantity) << '\n';
    }
}

// Ingestion -------------------------------------------------------------------

Ingested bucket_records(const std::vector<SalesRecord>& sales, const JobConfig& config) {
    Ingested out;
    std::set<SeriesKey> keys;
    int max_week = -1;
    out.records.reserve(sales.size());
    for (std::size_t i = 0; i < sales.size(); ++i) {
        const auto& s = sales[i];
        std::map<std::size_t, std::string> b;
        for (std::size_t a = 0; a < s.attributes.size(); ++a) b.emplace(a, s.attributes[a]);
        Record r{config.calendar.week_of(s.date), SeriesKey(std::move(b)), s.quantity};
        if (r.week < 0)
            throw data_error("WeekOutsideCalendar", fmt::format("record {} dated {} precedes the calendar start {}", i,
                                                                format_iso_date(s.date),
                                                                format_iso_date(config.calendar.origin())));
        max_week = std::max(max_week, r.week);
        keys.insert(r.key);
        out.records.push_back(std::move(r));
    }
    out.weeks = config.calendar.weeks.value_or(max_week + 1);
    if (max_week >= out.weeks)
        throw data_error("WeekOutsideCalendar",
                         fmt::format("records extend to week {} but the calendar has {} weeks", max_week, out.weeks));
    out.bottom_keys.assign(keys.begin(), keys.end());
    return out;
}

Dataset build_dataset(const JobConfig& config, const std::vector<SalesRecord>& sales) {
    const auto ing = bucket_records(sales, config);
    Dataset ds;
    ds.structure = build_structure(config.schema, config.levels, ing.bottom_keys);
    ds.S = build_summing_matrix(ds.structure);
    ds.series = aggregate_records(ing.records, ds.structure, ds.S, ing.weeks, config.period,
                                  format_iso_date(config.calendar.origin()));
    ds.records = sales.size();
    ds.weeks = ing.weeks;
    return ds;
}

Dataset load_dataset(const JobConfig& config, const fs::path& data_path) {
    return build_dataset(config, parse_sales_csv(data_path, config.schema));
}

// Synthetic data ----------------------------------------------------------------

Eigen::MatrixXd synthetic_bottom_sales(const AttributeSchema& schema, const std::vector<SeriesKey>& bottom, int weeks,
                                       int period, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto nb = static_cast<double>(bottom.size());
    const double s = std::max(period, 2);

    // Shared signal: fixed seasonal shape plus an AR(1) disturbance.
    const double amplitude = 40.0;
    std::vector<double> shared(static_cast<std::size_t>(weeks));
    double ar = 0.0;
    for (int t = 0; t < weeks; ++t) {
        ar = 0.5 * ar + 4.0 * normal(rng);
        const double angle = 2.0 * std::numbers::pi * t / s;
        shared[static_cast<std::size_t>(t)] = amplitude * (std::sin(angle) + 0.5 * std::cos(2.0 * angle)) + ar;
    }
    // Offsetting component: one draw per week, signed per bottom series.
    std::vector<double> offsetting(static_cast<std::size_t>(weeks));
    for (auto& v : offsetting) v = 12.0 * normal(rng);

    Eigen::MatrixXd out(static_cast<Eigen::Index>(bottom.size()), weeks);
    for (std::size_t j = 0; j < bottom.size(); ++j) {
        double sign = 1.0;
        for (const auto& [attr, value] : bottom[j].bindings()) {
            const auto& vals = schema.attributes()[attr].values;
            const auto pos = static_cast<std::size_t>(std::find(vals.begin(), vals.end(), value) - vals.begin());
            if (pos % 2 == 1) sign = -sign;
        }
        for (int t = 0; t < weeks; ++t) {
            const double v = 100.0 + shared[static_cast<std::size_t>(t)] / nb +
                             sign * offsetting[static_cast<std::size_t>(t)] + 2.0 * normal(rng);
            out(static_cast<Eigen::Index>(j), t) = std::max(0.0, v);
        }
    }
    return out;
}

std::vector<SalesRecord> synthetic_sales(const JobConfig& config, int weeks, std::uint64_t seed) {
    // Every combination of attribute values is sold.
    std::vector<SeriesKey> bottom{SeriesKey{}};
    for (std::size_t a = 0; a < config.schema.size(); ++a) {
        std::vector<SeriesKey> next;
        for (const auto& key : bottom)
            for (const auto& v : config.schema.attributes()[a].values) {
                auto b = key.bindings();
                b.emplace(a, v);
                next.emplace_back(std::move(b));
            }
        bottom = std::move(next);
    }
    const auto weekly = synthetic_bottom_sales(config.schema, bottom, weeks, config.period, seed);
    std::vector<SalesRecord> sales;
    const Date origin = config.calendar.origin();
    for (int t = 0; t < weeks; ++t)
        for (std::size_t j = 0; j < bottom.size(); ++j) {
            // Two sales days per week, split 60/40 and rounded to whole units.
            const double total = std::round(weekly(static_cast<Eigen::Index>(j), t));
            const double first = std::round(0.6 * total);
            std::vector<std::string> attrs;
            for (const auto& [attr, value] : bottom[j].bindings()) attrs.push_back(value);
            sales.push_back({origin + std::chrono::days(7 * t), attrs, first});
            sales.push_back({origin + std::chrono::days(7 * t + 3), attrs, total - first});
        }
    return sales;
}

// Output ------------------------------------------------------------------------

std::string format_number(double v) {
    if (std::isnan(v)) return "NA";
    if (v == 0.0) return "0";
    return fmt::format("{}", v);
}

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw data_error("WriteFailed", fmt::format("cannot write '{}'", path.string()));
    return out;
}

void write_key_columns(std::ostream& out, const GroupStructure& structure, const SeriesKey& key) {
    for (std::size_t a = 0; a < structure.schema.size(); ++a) {
        auto it = key.bindings().find(a);
        out << ',' << (it == key.bindings().end() ? std::string() : it->second);
    }
}

}  // namespace

void write_forecasts_csv(const fs::path& path, const GroupStructure& structure,
                         const std::vector<MethodOutput>& outputs) {
    auto out = open_out(path);
    const auto h = outputs.empty() ? 0 : outputs.front().forecasts.cols();
    out << "method,node";
    for (const auto& a : structure.schema.attributes()) out << ',' << a.name;
    for (Eigen::Index k = 1; k <= h; ++k) out << ",h" << k;
    out << ",negative\n";
    for (const auto& o : outputs)
        for (std::size_t i = 0; i < structure.nodes.size(); ++i) {
            out << display_name(o.method) << ',' << structure.nodes[i].label(structure.schema);
            write_key_columns(out, structure, structure.nodes[i]);
            bool negative = false;
            for (Eigen::Index k = 0; k < o.forecasts.cols(); ++k) {
                const double v = o.forecasts(static_cast<Eigen::Index>(i), k);
                negative = negative || v < 0.0;
                out << ',' << format_number(v);
            }
            out << ',' << (negative ? 1 : 0) << '\n';
        }
}

void write_report_csv(const fs::path& path, const EvaluationReport& report) {
    auto out = open_out(path);
    const std::set<std::string> summary(report.summary_nodes.begin(), report.summary_nodes.end());
    out << "node,level,method,mase,rmse,horizon,flagged,summary\n";
    for (const auto& r : report.rows)
        out << r.node << ',' << r.level << ',' << r.method << ',' << format_number(r.mase) << ','
            << format_number(r.rmse) << ',' << r.horizon << ',' << (r.flagged ? 1 : 0) << ','
            << (summary.count(r.node) ? 1 : 0) << '\n';
}

void write_residuals_csv(const fs::path& path, const GroupStructure& structure, const BaseRun& run) {
    auto out = open_out(path);
    out << "node,offset,residual\n";
    for (std::size_t i = 0; i < run.nodes.size(); ++i) {
        const auto& r = run.nodes[i].residuals;
        const auto label = structure.nodes[i].label(structure.schema);
        for (std::size_t t = 0; t < r.size(); ++t)
            out << label << ',' << static_cast<long long>(t) - static_cast<long long>(r.size()) << ','
                << format_number(r[t]) << '\n';
    }
}

void write_residual_plots(const fs::path& dir, const GroupStructure& structure, const BaseRun& run, int period) {
    auto qq = open_out(dir / "qq.csv");
    auto ac = open_out(dir / "acf.csv");
    qq << "node,theoretical,sample\n";
    ac << "node,lag,acf,pacf\n";
    for (std::size_t i = 0; i < run.nodes.size(); ++i) {
        const auto& e = run.nodes[i].model_residuals;
        const auto label = structure.nodes[i].label(structure.schema);
        for (const auto& p : qq_points(e))
            qq << label << ',' << format_number(p.theoretical) << ',' << format_number(p.sample) << '\n';
        if (e.size() < 3) continue;
        const std::size_t max_lag = std::min<std::size_t>(std::max(10, 2 * period), e.size() - 1);
        const auto r = acf(e, max_lag);
        const auto pr = durbin_levinson(r);
        for (std::size_t k = 1; k <= max_lag; ++k)
            ac << label << ',' << k << ',' << format_number(r[k]) << ',' << format_number(pr[k]) << '\n';
    }
}

namespace {

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json diagnostics_json(const JobConfig& config, const Dataset& data, const BaseRun& run,
                      const std::vector<MethodOutput>& outputs) {
    json doc;
    doc["config"] = to_json(config);
    doc["dataset"] = {{"records", data.records},
                      {"weeks", data.weeks},
                      {"nodes", data.structure.nodes.size()},
                      {"bottom_series", data.structure.bottom.size()},
                      {"calendar_origin", format_iso_date(config.calendar.origin())}};
    doc["residual_rows"] = run.residuals.values.rows();
    json nodes = json::array();
    for (std::size_t i = 0; i < run.nodes.size(); ++i) {
        const auto& n = run.nodes[i];
        json j;
        j["node"] = n.key.label(data.structure.schema);
        j["level"] = n.key.level();
        j["fallback"] = n.fallback;
        j["notes"] = n.notes;
        j["lambda"] = n.lambda ? json(*n.lambda) : json(nullptr);
        j["candidates"] = n.candidates;
        if (n.order) {
            const auto& o = *n.order;
            j["order"] = {{"p", o.p}, {"d", o.d}, {"q", o.q}, {"P", o.P}, {"D", o.D}, {"Q", o.Q}, {"s", o.s},
                          {"label", o.to_string()}};
        } else {
            j["order"] = nullptr;
        }
        if (n.criteria)
            j["criteria"] = {{"aic", number_or_null(n.criteria->aic)},
                             {"aicc", number_or_null(n.criteria->aicc)},
                             {"bic", number_or_null(n.criteria->bic)},
                             {"k", n.criteria->k},
                             {"n", n.criteria->n}};
        else
            j["criteria"] = nullptr;
        if (n.ljung_box)
            j["ljung_box"] = {{"q_star", number_or_null(n.ljung_box->q_star)},
                              {"lags", n.ljung_box->lags_tested},
                              {"dof", n.ljung_box->dof},
                              {"p_value", number_or_null(n.ljung_box->p_value)}};
        else
            j["ljung_box"] = nullptr;
        j["residual_count"] = n.residuals.size();
        j["base_forecast"] = json::array();
        for (double v : n.forecast) j["base_forecast"].push_back(number_or_null(v));
        nodes.push_back(std::move(j));
    }
    doc["nodes"] = std::move(nodes);

    json methods = json::array();
    for (const auto& o : outputs) {
        json m;
        m["method"] = display_name(o.method);
        // Coherence: every row against the sum of its bottom rows.
        Eigen::MatrixXd bottom(data.S.entries.cols(), o.forecasts.cols());
        for (const auto& [key, col] : data.S.col_index)
            bottom.row(static_cast<Eigen::Index>(col)) = o.forecasts.row(static_cast<Eigen::Index>(data.S.row_index.at(key)));
        const double incoherence = (o.forecasts - data.S.entries * bottom).cwiseAbs().maxCoeff();
        m["max_incoherence"] = incoherence;
        m["negative_forecasts"] = (o.forecasts.array() < 0.0).count();
        if (o.weights) {
            m["weights"] = to_string(o.weights->kind);
            m["shrink_intensity"] = o.weights->shrink_intensity;
            m["warnings"] = o.weights->warnings;
        }
        methods.push_back(std::move(m));
    }
    doc["methods"] = std::move(methods);
    return doc;
}

// Reading precomputed forecasts -----------------------------------------------------

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::map<std::string, std::size_t> index;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw data_error("EmptyFile", fmt::format("cannot open '{}'", path.string()));
    CsvTable t;
    std::string line;
    while (std::getline(in, line))
        if (!blank(line)) break;
    if (blank(line)) throw data_error("EmptyFile", fmt::format("'{}' has no header", path.string()));
    t.header = split_csv_line(line);
    t.index = header_index(t.header);
    while (std::getline(in, line)) {
        if (blank(line)) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != t.header.size())
            throw data_error("BadRow", fmt::format("'{}': row with {} fields, header has {}", path.string(),
                                                   fields.size(), t.header.size()));
        t.rows.push_back(std::move(fields));
    }
    return t;
}

double parse_number(const std::string& text, const fs::path& path) {
    std::size_t consumed = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &consumed);
    } catch (const std::exception&) {
        consumed = 0;
    }
    if (consumed != text.size() || text.empty())
        throw data_error("BadQuantity", fmt::format("'{}': '{}' is not a number", path.string(), text));
    return v;
}

}  // namespace

std::vector<SeriesKey> read_forecast_keys(const fs::path& path, const AttributeSchema& schema) {
    const auto t = read_table(path);
    const auto node_col = require_column(t.index, "node", path.string());
    std::vector<SeriesKey> keys;
    std::set<SeriesKey> seen;
    for (const auto& r : t.rows) {
        auto key = SeriesKey::parse_label(schema, r[node_col]);
        if (seen.insert(key).second) keys.push_back(std::move(key));
    }
    return keys;
}

BaseForecasts read_forecasts_csv(const fs::path& path, const GroupStructure& structure, const std::string& method) {
    const auto t = read_table(path);
    const auto node_col = require_column(t.index, "node", path.string());
    const auto method_col = require_column(t.index, "method", path.string());
    std::vector<std::size_t> h_cols;
    for (int k = 1;; ++k) {
        auto it = t.index.find(fmt::format("h{}", k));
        if (it == t.index.end()) break;
        h_cols.push_back(it->second);
    }
    if (h_cols.empty()) throw data_error("MissingColumn", fmt::format("{}: no h1.. forecast columns", path.string()));

    BaseForecasts base;
    base.values = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(structure.nodes.size()),
                                            static_cast<Eigen::Index>(h_cols.size()), std::nan(""));
    std::vector<bool> filled(structure.nodes.size(), false);
    for (const auto& r : t.rows) {
        if (r[method_col] != method) continue;
        const auto key = SeriesKey::parse_label(structure.schema, r[node_col]);
        const auto pos = structure.find(key);
        if (!pos) throw data_error("KeyOutsideSchema", fmt::format("{}: node '{}' is not in the structure",
                                                                   path.string(), r[node_col]));
        filled[*pos] = true;
        for (std::size_t k = 0; k < h_cols.size(); ++k)
            base.values(static_cast<Eigen::Index>(*pos), static_cast<Eigen::Index>(k)) = parse_number(r[h_cols[k]], path);
    }
    for (std::size_t i = 0; i < filled.size(); ++i)
        if (!filled[i])
            throw data_error("DimensionMismatch", fmt::format("{}: no '{}' forecast for node '{}'", path.string(), method,
                                                              structure.nodes[i].label(structure.schema)));
    return base;
}

ResidualMatrix read_residuals_csv(const fs::path& path, const GroupStructure& structure) {
    const auto t = read_table(path);
    const auto node_col = require_column(t.index, "node", path.string());
    const auto off_col = require_column(t.index, "offset", path.string());
    const auto val_col = require_column(t.index, "residual", path.string());
    std::vector<std::map<long long, double>> per(structure.nodes.size());
    for (const auto& r : t.rows) {
        const auto key = SeriesKey::parse_label(structure.schema, r[node_col]);
        const auto pos = structure.find(key);
        if (!pos) throw data_error("KeyOutsideSchema", fmt::format("{}: node '{}' is not in the structure",
                                                                   path.string(), r[node_col]));
        per[*pos][static_cast<long long>(parse_number(r[off_col], path))] = parse_number(r[val_col], path);
    }
    std::vector<std::vector<double>> tails;
    for (auto& m : per) {
        std::vector<double> v;
        for (const auto& [off, val] : m) v.push_back(val);
        tails.push_back(std::move(v));
    }
    return ResidualMatrix::from_aligned_tails(tails);
}

// Runs ----------------------------------------------------------------------------

namespace {

ForecastSettings settings_from(const JobConfig& config) {
    ForecastSettings s;
    s.horizon = config.horizon;
    s.transform = config.transform;
    s.search = config.search;
    s.jobs = config.jobs;
    return s;
}

void write_json(const fs::path& path, const json& doc) {
    auto out = open_out(path);
    out << doc.dump(2) << '\n';
}

}  // namespace

JobResult run_evaluate(const JobConfig& config, const fs::path& data_path, const fs::path& out_dir) {
    const auto data = load_dataset(config, data_path);
    const auto train = config.training_length(data.weeks);
    if (train + static_cast<std::size_t>(config.horizon) > static_cast<std::size_t>(data.weeks))
        throw config_error("InvalidSplit", fmt::format("training span {} plus horizon {} exceeds {} weeks", train,
                                                       config.horizon, data.weeks));
    auto job = evaluate_job(data.structure, data.S, data.series, train, config.methods, settings_from(config));
    job.evaluation.report.train_end = format_iso_date(config.calendar.week_date(static_cast<int>(train) - 1));
    job.evaluation.report.test_start = format_iso_date(config.calendar.week_date(static_cast<int>(train)));

    fs::create_directories(out_dir);
    write_forecasts_csv(out_dir / "forecasts.csv", data.structure, job.evaluation.outputs);
    write_report_csv(out_dir / "report.csv", job.evaluation.report);
    auto diag = diagnostics_json(config, data, job.base_run, job.evaluation.outputs);
    diag["split"] = {{"train_weeks", train},
                     {"horizon", config.horizon},
                     {"train_end", job.evaluation.report.train_end},
                     {"test_start", job.evaluation.report.test_start}};
    diag["summary_nodes"] = job.evaluation.report.summary_nodes;
    write_json(out_dir / "diagnostics.json", diag);
    write_residual_plots(out_dir, data.structure, job.base_run, config.period);
    return job;
}

BaseRun run_forecast(const JobConfig& config, const fs::path& data_path, const fs::path& out_dir) {
    const auto data = load_dataset(config, data_path);
    auto run = produce_base_forecasts(data.structure, data.series, settings_from(config));
    std::vector<MethodOutput> outputs;
    std::vector<Method> methods(config.methods);
    std::sort(methods.begin(), methods.end());
    methods.erase(std::unique(methods.begin(), methods.end()), methods.end());
    for (auto m : methods) outputs.push_back(apply_method(m, run.base, data.S, run.residuals));

    fs::create_directories(out_dir);
    write_forecasts_csv(out_dir / "base_forecasts.csv", data.structure,
                        {MethodOutput{Method::Baseline, run.base.values, std::nullopt}});
    write_forecasts_csv(out_dir / "forecasts.csv", data.structure, outputs);
    write_residuals_csv(out_dir / "residuals.csv", data.structure, run);
    auto diag = diagnostics_json(config, data, run, outputs);
    diag["forecast_start"] = format_iso_date(config.calendar.week_date(data.weeks));
    write_json(out_dir / "diagnostics.json", diag);
    write_residual_plots(out_dir, data.structure, run, config.period);
    return run;
}

}  // namespace hts

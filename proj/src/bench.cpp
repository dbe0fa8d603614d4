#include "dimred/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "dimred/cas.hpp"
#include "dimred/eval.hpp"
#include "json.hpp"

namespace dimred {

namespace {

constexpr double kMaxInterval = 150.0;

std::string trim(const std::string& s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double mean_of(const std::vector<double>& v)
{
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

void fill_arm(ArmMetrics& arm, const Problem& p, const SolveResult& r)
{
    arm.expr = r.expr.str();
    arm.nrmse = r.nrmse_test;
    arm.complexity = static_cast<double>(r.complexity);
    arm.recovered = recovery(p.f_true, r.expr);
    arm.jaccard = jaccard(p.f_true, r.expr);
}

std::string csv_number(double v)
{
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os.precision(12);
    os << v;
    return os.str();
}

std::string csv_flag(const std::optional<bool>& b) { return b ? (*b ? "1" : "0") : ""; }

std::string csv_text(const std::string& s)
{
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + '"';
}

std::vector<Range> parse_ranges(const std::string& text)
{
    std::vector<Range> out;
    std::istringstream items(text);
    std::string item;
    while (std::getline(items, item, ',')) {
        auto colon = item.find(':');
        if (colon == std::string::npos) throw std::invalid_argument("range without ':'");
        std::size_t used = 0;
        std::string lo = trim(item.substr(0, colon)), hi = trim(item.substr(colon + 1));
        Range r;
        r.lo = std::stod(lo, &used);
        if (used != lo.size()) throw std::invalid_argument("trailing characters");
        r.hi = std::stod(hi, &used);
        if (used != hi.size()) throw std::invalid_argument("trailing characters");
        if (!(r.lo < r.hi) || !std::isfinite(r.lo) || !std::isfinite(r.hi)) throw std::invalid_argument("empty range");
        out.push_back(r);
    }
    if (out.empty()) throw std::invalid_argument("no ranges");
    return out;
}

}  // namespace

std::vector<Problem> parse_corpus(std::istream& in)
{
    std::vector<Problem> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto fail = [&](const std::string& why) {
            throw CorpusError("corpus line " + std::to_string(lineno) + ": " + why);
        };
        auto tab1 = line.find('\t');
        auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
        if (tab2 == std::string::npos) fail("expected id<TAB>d<TAB>expression");
        Problem p;
        p.id = trim(line.substr(0, tab1));
        try {
            std::size_t used = 0;
            std::string dtext = trim(line.substr(tab1 + 1, tab2 - tab1 - 1));
            p.d = std::stoi(dtext, &used);
            if (used != dtext.size()) fail("bad dimension '" + dtext + "'");
        } catch (const std::logic_error&) {
            fail("bad dimension");
        }
        if (p.id.empty()) fail("empty id");
        if (p.d < 1) fail("dimension must be positive");
        auto tab3 = line.find('\t', tab2 + 1);
        try {
            p.f_true = parse(trim(line.substr(tab2 + 1, tab3 == std::string::npos ? tab3 : tab3 - tab2 - 1)));
        } catch (const ParseError& e) {
            fail(e.what());
        }
        if (tab3 != std::string::npos) {
            std::string text = trim(line.substr(tab3 + 1));
            try {
                p.ranges = parse_ranges(text);
            } catch (const std::logic_error&) {
                fail("bad ranges '" + text + "'");
            }
            if (p.ranges.size() == 1) p.ranges.resize(static_cast<std::size_t>(p.d), p.ranges[0]);
            if (p.ranges.size() != static_cast<std::size_t>(p.d)) fail("expected one range per variable");
        }
        if (p.f_true.arity() > p.d) fail("expression uses more than " + std::to_string(p.d) + " variables");
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Problem> load_corpus(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw CorpusError("cannot open corpus " + path);
    return parse_corpus(in);
}

Dataset sample_problem(const Problem& p, Index n, std::uint64_t seed)
{
    if (n < 1) throw std::invalid_argument("sample size must be positive");
    Rng rng(derive_seed(seed, 0x5a));
    Matrix X(n, p.d);
    Vector y(n);
    Index have = 0;
    if (!p.ranges.empty()) {
        if (p.ranges.size() != static_cast<std::size_t>(p.d)) throw std::invalid_argument("one range per variable");
        std::vector<std::uniform_real_distribution<double>> u;
        for (auto& r : p.ranges) u.emplace_back(r.lo, r.hi);
        for (Index drawn = 0; drawn < 1000 * n; drawn += n) {
            Matrix draw(n - have, p.d);
            for (Index i = 0; i < draw.rows(); ++i)
                for (Index j = 0; j < p.d; ++j) draw(i, j) = u[static_cast<std::size_t>(j)](rng);
            Vector v = eval(p.f_true, draw);
            for (Index i = 0; i < draw.rows(); ++i) {
                if (!std::isfinite(v(i))) continue;
                X.row(have) = draw.row(i);
                y(have) = v(i);
                ++have;
            }
            if (have == n) return Dataset::from_samples(std::move(X), std::move(y));
        }
        throw Unsampleable("could not sample " + p.id + " on its ranges");
    }
    for (double c = 1.0; c <= kMaxInterval; c += 0.5) {
        std::uniform_real_distribution<double> u(-c, c);
        Matrix draw(n - have, p.d);
        for (Index i = 0; i < draw.rows(); ++i)
            for (Index j = 0; j < p.d; ++j) draw(i, j) = u(rng);
        Vector v = eval(p.f_true, draw);
        for (Index i = 0; i < draw.rows(); ++i) {
            if (!std::isfinite(v(i))) continue;
            X.row(have) = draw.row(i);
            y(have) = v(i);
            ++have;
        }
        if (have == n) return Dataset::from_samples(std::move(X), std::move(y));
    }
    throw Unsampleable("could not sample " + p.id + " on [-150, 150]^" + std::to_string(p.d));
}

Vector add_noise(const Vector& y, double gamma, std::uint64_t seed)
{
    if (gamma < 0.0) throw std::invalid_argument("noise level must be non-negative");
    if (gamma == 0.0) return y;
    double sd = gamma * std::sqrt(y.squaredNorm() / static_cast<double>(y.size()));
    Rng rng(derive_seed(seed, 0x40));
    std::normal_distribution<double> eps(0.0, sd);
    Vector out = y;
    for (Index i = 0; i < out.size(); ++i) out(i) += eps(rng);
    return out;
}

ReductionRate reduction_rate(const SearchResult& result, const Problem& p)
{
    // f_true carried along each node's substitution chain; empty once a step fails
    std::map<const SearchNode*, std::optional<ExprDag>> carried;
    auto chain = [&](auto& self, const SearchNode& node) -> std::optional<ExprDag> {
        auto it = carried.find(&node);
        if (it != carried.end()) return it->second;
        std::optional<ExprDag> f;
        if (!node.parent) {
            f = p.f_true;
        } else if (auto up = self(self, *node.parent)) {
            try {
                f = transfer(*up, static_cast<int>(node.parent->dataset.dim()), *node.edge);
            } catch (const std::exception&) {
                f.reset();
            }
        }
        carried.emplace(&node, f);
        return f;
    };

    const double d = static_cast<double>(result.root().dataset.dim());
    ReductionRate r;
    Index min_valid = result.root().dataset.dim();
    Index min_any = min_valid;
    std::size_t expanded = 0, valid = 0;
    for (const auto& level : result.all_levels) {
        for (const auto& node : level) {
            bool ok = chain(chain, *node).has_value();
            min_any = std::min(min_any, node->dataset.dim());
            if (ok) min_valid = std::min(min_valid, node->dataset.dim());
            if (node->parent) {
                ++expanded;
                valid += ok ? 1 : 0;
            }
        }
    }
    for (const auto& node : result.best_path) r.all_valid = r.all_valid && chain(chain, *node).has_value();
    r.rate = 1.0 - static_cast<double>(min_valid) / d;
    r.unfiltered_rate = 1.0 - static_cast<double>(min_any) / d;
    r.valid_sub_fraction = expanded ? static_cast<double>(valid) / static_cast<double>(expanded)
                                    : std::numeric_limits<double>::quiet_NaN();
    return r;
}

bool recovery(const ExprDag& f_true, const ExprDag& f_hat) { return equivalent(f_true, f_hat); }

double jaccard(const ExprDag& f_true, const ExprDag& f_hat)
{
    auto a = subexpressions(f_true);
    auto b = subexpressions(f_hat);
    std::size_t common = 0;
    for (const auto& s : a) common += b.count(s);
    std::size_t all = a.size() + b.size() - common;
    return all == 0 ? 1.0 : static_cast<double>(common) / static_cast<double>(all);
}

Aggregates aggregate(const std::vector<ReportRow>& rows)
{
    Aggregates a;
    a.rows = rows.size();
    std::vector<double> rate, unf, allv, vsf, rec, jac, err, cx, rrec, rjac, rerr, rcx, wall;
    auto put = [](std::vector<double>& v, double x) {
        if (!std::isnan(x)) v.push_back(x);
    };
    auto flag = [](std::vector<double>& v, const std::optional<bool>& b) {
        if (b) v.push_back(*b ? 1.0 : 0.0);
    };
    for (const auto& r : rows) {
        if (!r.ok()) continue;
        ++a.ok_rows;
        put(rate, r.reduction_rate);
        put(unf, r.unfiltered_rate);
        flag(allv, r.all_valid);
        put(vsf, r.valid_sub_fraction);
        flag(rec, r.beam.recovered);
        put(jac, r.beam.jaccard);
        put(err, r.beam.nrmse);
        put(cx, r.beam.complexity);
        flag(rrec, r.root.recovered);
        put(rjac, r.root.jaccard);
        put(rerr, r.root.nrmse);
        put(rcx, r.root.complexity);
        put(wall, r.wall_time);
    }
    a.reduction_rate = mean_of(rate);
    a.unfiltered_rate = mean_of(unf);
    a.all_valid = mean_of(allv);
    a.valid_sub_fraction = mean_of(vsf);
    a.recovered = mean_of(rec);
    a.jaccard = mean_of(jac);
    a.nrmse = mean_of(err);
    a.complexity = mean_of(cx);
    a.root_recovered = mean_of(rrec);
    a.root_jaccard = mean_of(rjac);
    a.root_nrmse = mean_of(rerr);
    a.root_complexity = mean_of(rcx);
    a.wall_time = mean_of(wall);
    return a;
}

ReportRow run_problem(const Problem& p, const BenchConfig& cfg, std::uint64_t problem_seed)
{
    auto start = std::chrono::steady_clock::now();
    ReportRow row;
    row.id = p.id;
    row.d = p.d;
    try {
        Dataset ds = p.samples ? *p.samples : sample_problem(p, cfg.n, derive_seed(problem_seed, 1));
        if (cfg.gamma > 0.0) ds = Dataset::from_samples(ds.X, add_noise(ds.y, cfg.gamma, derive_seed(problem_seed, 2)));
        SearchResult result = search(ds, cfg.beam);
        ReductionRate rr = reduction_rate(result, p);
        row.reduction_rate = rr.rate;
        row.unfiltered_rate = rr.unfiltered_rate;
        row.all_valid = rr.all_valid;
        row.valid_sub_fraction = rr.valid_sub_fraction;
        row.final_vars = static_cast<int>(result.best().dataset.dim());
        row.trace = trace_jsonl(result);
        if (cfg.regressor) {
            std::uint64_t split = derive_seed(problem_seed, 3);
            fill_arm(row.beam, p, solve_pipeline(result, *cfg.regressor, cfg.holdout, split));
            fill_arm(row.root, p, solve_root(result.root().dataset, *cfg.regressor, cfg.holdout, split));
        }
    } catch (const std::exception& e) {
        row.status = e.what();
    }
    row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return row;
}

Report run_benchmark(const std::vector<Problem>& problems, const BenchConfig& cfg)
{
    Report rep;
    rep.gamma = cfg.gamma;
    rep.measure = cfg.beam.measure;
    rep.rows.resize(problems.size());
    const auto count = static_cast<std::ptrdiff_t>(problems.size());
#pragma omp parallel for schedule(dynamic, 1) if (cfg.beam.exec == Exec::Parallel)
    for (std::ptrdiff_t i = 0; i < count; ++i)
        rep.rows[static_cast<std::size_t>(i)] = run_problem(problems[static_cast<std::size_t>(i)], cfg,
                                                           derive_seed(cfg.seed, static_cast<std::uint64_t>(i)));
    rep.mean = aggregate(rep.rows);
    return rep;
}

void write_report_csv(std::ostream& out, const Report& report)
{
    out << "id,status,d,final_vars,reduction_rate,unfiltered_rate,all_valid,valid_sub_fraction,recovered,jaccard,"
           "nrmse,complexity,root_recovered,root_jaccard,root_nrmse,root_complexity,wall_time,expr,root_expr\n";
    for (const auto& r : report.rows) {
        out << csv_text(r.id) << ',' << csv_text(r.status) << ',' << r.d << ',' << r.final_vars << ','
            << csv_number(r.reduction_rate) << ',' << csv_number(r.unfiltered_rate) << ',' << csv_flag(r.all_valid)
            << ',' << csv_number(r.valid_sub_fraction) << ',' << csv_flag(r.beam.recovered) << ','
            << csv_number(r.beam.jaccard) << ',' << csv_number(r.beam.nrmse) << ',' << csv_number(r.beam.complexity)
            << ',' << csv_flag(r.root.recovered) << ',' << csv_number(r.root.jaccard) << ','
            << csv_number(r.root.nrmse) << ',' << csv_number(r.root.complexity) << ',' << csv_number(r.wall_time)
            << ',' << csv_text(r.beam.expr) << ',' << csv_text(r.root.expr) << '\n';
    }
    const Aggregates& a = report.mean;
    out << "mean," << csv_text("ok " + std::to_string(a.ok_rows) + "/" + std::to_string(a.rows)) << ",,,"
        << csv_number(a.reduction_rate) << ',' << csv_number(a.unfiltered_rate) << ',' << csv_number(a.all_valid)
        << ',' << csv_number(a.valid_sub_fraction) << ',' << csv_number(a.recovered) << ','
        << csv_number(a.jaccard) << ',' << csv_number(a.nrmse) << ',' << csv_number(a.complexity) << ','
        << csv_number(a.root_recovered) << ',' << csv_number(a.root_jaccard) << ',' << csv_number(a.root_nrmse)
        << ',' << csv_number(a.root_complexity) << ',' << csv_number(a.wall_time) << ",,\n";
}

void write_trace_jsonl(std::ostream& out, const Report& report)
{
    for (const auto& r : report.rows) {
        std::istringstream lines(r.trace);
        std::string line;
        while (std::getline(lines, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            j["id"] = r.id;
            out << j.dump() << '\n';
        }
    }
}

void write_plot_data(std::ostream& out, const std::vector<Report>& reports, bool header)
{
    if (header) out << "noise_level,mean_reduction_rate,measure\n";
    for (const auto& r : reports)
        out << csv_number(r.gamma) << ',' << csv_number(r.mean.reduction_rate) << ',' << name(r.measure) << '\n';
}

}  // namespace dimred

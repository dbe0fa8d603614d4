#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dimred/beamsearch.hpp"
#include "dimred/regress.hpp"

namespace dimred {

class Unsampleable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class CorpusError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct Problem {
    std::string id;
    int d = 0;
    ExprDag f_true;
    std::optional<Dataset> samples;
    /// Per-variable sampling box; empty means the growing-interval sampler.
    std::vector<Range> ranges;
};

/// Lines `id<TAB>d<TAB>expression[<TAB>ranges]`; blank lines and `#` comments
/// are skipped. Ranges are `lo:hi` items separated by commas, one per variable
/// or a single item shared by all. Throws CorpusError naming the offending line.
std::vector<Problem> parse_corpus(std::istream& in);
std::vector<Problem> load_corpus(const std::string& path);

/// Draws from [-c, c]^d with c = 1, 1.5, ... keeping rows where f_true is
/// finite, until n rows are collected. Throws Unsampleable once c passes 150.
/// With ranges set, draws uniformly from that box instead and throws
/// Unsampleable when fewer than one draw in a thousand is finite.
Dataset sample_problem(const Problem& p, Index n, std::uint64_t seed);

/// y plus N(0, gamma * RMS(y)) noise. gamma = 0 returns y unchanged.
Vector add_noise(const Vector& y, double gamma, std::uint64_t seed);

struct ReductionRate {
    /// Over nodes whose whole substitution chain verifies against f_true.
    double rate = 0.0;
    /// Whether the best path verifies.
    bool all_valid = true;
    /// Over every node, verified or not.
    double unfiltered_rate = 0.0;
    /// Share of non-root nodes whose chain verifies; NaN when nothing was expanded.
    double valid_sub_fraction = 1.0;
};

ReductionRate reduction_rate(const SearchResult& result, const Problem& p);

bool recovery(const ExprDag& f_true, const ExprDag& f_hat);

/// |S ∩ Ŝ| / |S ∪ Ŝ| over simplified subexpression sets.
double jaccard(const ExprDag& f_true, const ExprDag& f_hat);

struct BenchConfig {
    BeamConfig beam;
    /// No regressor: only the reduction metrics are computed.
    std::optional<RegressorSpec> regressor;
    double gamma = 0.0;
    Index n = 1000;
    double holdout = 0.2;
    std::uint64_t seed = 0;
};

/// Metrics of one arm; NaN (or empty) when the arm did not run.
struct ArmMetrics {
    std::optional<bool> recovered;
    double jaccard = std::numeric_limits<double>::quiet_NaN();
    double nrmse = std::numeric_limits<double>::quiet_NaN();
    double complexity = std::numeric_limits<double>::quiet_NaN();
    std::string expr;
};

struct ReportRow {
    std::string id;
    /// "ok" or the reason the problem failed.
    std::string status = "ok";
    int d = 0;
    int final_vars = 0;
    double reduction_rate = std::numeric_limits<double>::quiet_NaN();
    double unfiltered_rate = std::numeric_limits<double>::quiet_NaN();
    std::optional<bool> all_valid;
    double valid_sub_fraction = std::numeric_limits<double>::quiet_NaN();
    ArmMetrics beam;
    ArmMetrics root;
    double wall_time = 0.0;
    std::string trace;

    bool ok() const { return status == "ok"; }
};

/// Means over the rows with status ok; NaN where no row has a value.
struct Aggregates {
    std::size_t rows = 0;
    std::size_t ok_rows = 0;
    double reduction_rate = 0.0;
    double unfiltered_rate = 0.0;
    double all_valid = 0.0;
    double valid_sub_fraction = 0.0;
    double recovered = 0.0;
    double jaccard = 0.0;
    double nrmse = 0.0;
    double complexity = 0.0;
    double root_recovered = 0.0;
    double root_jaccard = 0.0;
    double root_nrmse = 0.0;
    double root_complexity = 0.0;
    double wall_time = 0.0;
};

struct Report {
    std::vector<ReportRow> rows;
    Aggregates mean;
    double gamma = 0.0;
    Measure measure = Measure::Codec;
};

Aggregates aggregate(const std::vector<ReportRow>& rows);

ReportRow run_problem(const Problem& p, const BenchConfig& cfg, std::uint64_t problem_seed);

/// Every problem through both arms; failures become rows with a status.
/// Problems run concurrently when cfg.beam.exec is Parallel.
Report run_benchmark(const std::vector<Problem>& problems, const BenchConfig& cfg);

/// CSV with one row per problem, then a `mean` row.
void write_report_csv(std::ostream& out, const Report& report);
/// One JSON object per trace record, tagged with the problem id.
void write_trace_jsonl(std::ostream& out, const Report& report);
/// `noise_level,mean_reduction_rate,measure` lines, header first.
void write_plot_data(std::ostream& out, const std::vector<Report>& reports, bool header = true);

}  // namespace dimred

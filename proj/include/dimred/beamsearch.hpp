#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dimred/depmeasure.hpp"
#include "dimred/substitution.hpp"

namespace dimred {

struct SubTypes {
    bool input = true;
    bool outinput = true;
};

/// Parses "input", "outinput" or "both".
SubTypes parse_sub_types(const std::string& text);

struct BeamConfig {
    int beam_size = 1;
    Measure measure = Measure::Codec;
    GrammarBudget budget = GrammarBudget::standard(1);
    SubTypes sub_types;
    /// Number of substitution steps; negative means d - 1.
    int max_depth = -1;
    CandidateLimits limits;
    double max_drop = kMaxDroppedRows;
    Exec exec = Exec::Parallel;
};

struct SearchNode {
    Dataset dataset;
    DependenceScore score;
    std::shared_ptr<const SearchNode> parent;
    std::optional<Substitution> edge;
    int depth = 0;
};

using NodePtr = std::shared_ptr<const SearchNode>;

struct TraceRecord {
    int depth;
    std::string substitution;
    double score;
    int n_vars;
    double rows_dropped;
};

struct SearchResult {
    /// Root to the highest-scoring node over all levels, root included.
    std::vector<NodePtr> best_path;
    /// Survivors of every level; level 0 is the root.
    std::vector<std::vector<NodePtr>> all_levels;
    std::vector<TraceRecord> trace;
    std::size_t candidates_scored = 0;
    std::size_t candidates_rejected = 0;
    /// Candidates folded into an earlier one with rank-identical data.
    std::size_t candidates_merged = 0;

    const SearchNode& best() const { return *best_path.back(); }
    const SearchNode& root() const { return *best_path.front(); }
};

/// Applies `s`, runs the rejection filters and scores the result. Empty when
/// the candidate is rejected or the measure is undefined on it.
std::optional<std::pair<Dataset, DependenceScore>> score_candidate(const SearchNode& parent, const Substitution& s,
                                                                   Measure measure,
                                                                   double max_drop = kMaxDroppedRows,
                                                                   Exec exec = Exec::Serial);

struct CandidateOutcome {
    /// NaN when the candidate was rejected.
    double score = std::numeric_limits<double>::quiet_NaN();
    /// Equal for candidates whose new column (or output) has the same ranks,
    /// up to reversal, on the same rows: one is a monotone function of the other.
    std::uint64_t fingerprint = 0;
    bool ok() const { return !std::isnan(score); }
};

/// Outcome of every candidate of `parent`. The parallel variant distributes
/// candidates over threads; the serial one is the reference.
std::vector<CandidateOutcome> score_all(const SearchNode& parent, const std::vector<Substitution>& candidates,
                                        Measure measure, double max_drop, Exec exec);

std::vector<Substitution> candidates_for(const Dataset& ds, const BeamConfig& cfg);

/// Breadth-first beam search. Candidates of one parent sharing a fingerprint
/// compete as one: the earliest enumerated, with the best score among them.
/// Throws std::invalid_argument for fewer than 30 rows, beam_size < 1, or xi
/// with more than one input column.
SearchResult search(const Dataset& root, const BeamConfig& cfg);

/// Expression for the original output, over the original variables, from a
/// solution of the regression problem at `node` (over its columns).
/// Throws NotSolvable.
ExprDag reconstruct(const SearchNode& node, const ExprDag& solution);

/// One JSON object per line.
std::string trace_jsonl(const SearchResult& result);

}  // namespace dimred

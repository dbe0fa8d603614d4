#include "dimred/beamsearch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

#include "dimred/cas.hpp"
#include "json.hpp"

namespace dimred {

namespace {

int vars_after(const Substitution& s, Index d)
{
    if (auto* in = std::get_if<InputSub>(&s)) return static_cast<int>(d) - static_cast<int>(in->I.size()) + 1;
    return static_cast<int>(d) - static_cast<int>(std::get<OutInputSub>(s).I.size());
}

DependenceScore root_score(const Dataset& ds, Measure m, Exec exec)
{
    try {
        return score(m, ds.X, ds.y, exec);
    } catch (const DegenerateY&) {
        return {-std::numeric_limits<double>::infinity(), m};
    }
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return derive_seed(h ^ v, 0x51); }

std::uint64_t fingerprint(const Vector& column, const std::vector<Index>& rows, std::vector<int> I, bool input)
{
    std::sort(I.begin(), I.end());
    std::uint64_t base = input ? 1 : 2;
    for (int i : I) base = mix(base, static_cast<std::uint64_t>(i));
    for (Index r : rows) base = mix(base, static_cast<std::uint64_t>(r));
    RankVectors rv = compute_ranks(column);
    std::uint64_t up = base, down = base;
    for (std::size_t i = 0; i < rv.r.size(); ++i) {
        up = mix(up, static_cast<std::uint64_t>(rv.r[i]));
        down = mix(down, static_cast<std::uint64_t>(rv.l[i]));
    }
    return std::min(up, down);
}

struct Scored {
    std::size_t parent;
    std::size_t index;
    double score;
    int n_vars;
};

}  // namespace

SubTypes parse_sub_types(const std::string& text)
{
    if (text == "both") return {true, true};
    if (text == "input") return {true, false};
    if (text == "outinput") return {false, true};
    throw std::invalid_argument("unknown substitution types '" + text + "' (expected input, outinput or both)");
}

std::optional<std::pair<Dataset, DependenceScore>> score_candidate(const SearchNode& parent, const Substitution& s,
                                                                   Measure measure, double max_drop, Exec exec)
{
    try {
        Dataset next = apply_substitution(parent.dataset, s, max_drop);
        DependenceScore sc = score(measure, next.X, next.y, exec);
        if (!std::isfinite(sc.value)) return std::nullopt;
        return std::make_pair(std::move(next), sc);
    } catch (const RejectedCandidate&) {
        return std::nullopt;
    } catch (const DegenerateY&) {
        return std::nullopt;
    }
}

std::vector<CandidateOutcome> score_all(const SearchNode& parent, const std::vector<Substitution>& candidates,
                                        Measure measure, double max_drop, Exec exec)
{
    std::vector<CandidateOutcome> out(candidates.size());
    const auto count = static_cast<std::ptrdiff_t>(candidates.size());
#pragma omp parallel for schedule(dynamic, 4) if (exec == Exec::Parallel)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        const Substitution& s = candidates[static_cast<std::size_t>(i)];
        try {
            auto r = score_candidate(parent, s, measure, max_drop, Exec::Serial);
            if (!r) continue;
            const Dataset& ds = r->first;
            bool input = std::holds_alternative<InputSub>(s);
            out[static_cast<std::size_t>(i)] = {r->second.value,
                                                fingerprint(input ? Vector(ds.X.col(0)) : ds.y, ds.rows,
                                                            input ? std::get<InputSub>(s).I : std::get<OutInputSub>(s).I,
                                                            input)};
        } catch (const std::exception&) {
        }
    }
    return out;
}

std::vector<Substitution> candidates_for(const Dataset& ds, const BeamConfig& cfg)
{
    std::vector<Substitution> out;
    int d = static_cast<int>(ds.dim());
    if (d < 2) return out;
    if (cfg.sub_types.input)
        for (auto& s : gen_input_candidates(d, cfg.budget, cfg.limits)) out.emplace_back(std::move(s));
    if (cfg.sub_types.outinput)
        for (auto& s : gen_outinput_candidates(d, cfg.budget, cfg.limits)) out.emplace_back(std::move(s));
    return out;
}

SearchResult search(const Dataset& root_ds, const BeamConfig& cfg)
{
    if (cfg.beam_size < 1) throw std::invalid_argument("beam size must be at least 1");
    if (root_ds.size() < 30) throw std::invalid_argument("beam search needs at least 30 rows");
    if (cfg.measure == Measure::Xi && root_ds.dim() > 1)
        throw std::invalid_argument("xi scores a single input column; use codec, kmac or volume");

    SearchResult result;
    auto root = std::make_shared<SearchNode>();
    root->dataset = root_ds;
    root->score = root_score(root_ds, cfg.measure, cfg.exec);
    NodePtr best = root;
    result.all_levels.push_back({root});
    result.trace.push_back({0, "", root->score.value, static_cast<int>(root_ds.dim()), 0.0});

    int max_depth = cfg.max_depth < 0 ? static_cast<int>(root_ds.dim()) - 1 : cfg.max_depth;
    for (int depth = 1; depth <= max_depth; ++depth) {
        const auto& level = result.all_levels.back();
        std::vector<std::vector<Substitution>> cands(level.size());
        std::vector<Scored> scored;
        for (std::size_t p = 0; p < level.size(); ++p) {
            cands[p] = candidates_for(level[p]->dataset, cfg);
            auto outcomes = score_all(*level[p], cands[p], cfg.measure, cfg.max_drop, cfg.exec);
            result.candidates_scored += outcomes.size();
            std::unordered_map<std::uint64_t, std::size_t> first;
            for (std::size_t i = 0; i < outcomes.size(); ++i) {
                const auto& o = outcomes[i];
                if (!o.ok()) {
                    ++result.candidates_rejected;
                    continue;
                }
                auto [it, fresh] = first.emplace(o.fingerprint, scored.size());
                if (!fresh) {
                    ++result.candidates_merged;
                    Scored& rep = scored[it->second];
                    rep.score = std::max(rep.score, o.score);
                    continue;
                }
                scored.push_back({p, i, o.score, vars_after(cands[p][i], level[p]->dataset.dim())});
            }
        }
        if (scored.empty()) break;

        std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(cfg.beam_size), scored.size());
        std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                          [](const Scored& a, const Scored& b) {
                              if (a.score != b.score) return a.score > b.score;
                              if (a.n_vars != b.n_vars) return a.n_vars < b.n_vars;
                              if (a.parent != b.parent) return a.parent < b.parent;
                              return a.index < b.index;
                          });

        std::vector<NodePtr> next;
        for (std::size_t k = 0; k < keep; ++k) {
            const Scored& c = scored[k];
            const NodePtr& parent = level[c.parent];
            const Substitution& s = cands[c.parent][c.index];
            auto node = std::make_shared<SearchNode>();
            node->dataset = apply_substitution(parent->dataset, s, cfg.max_drop);
            node->score = {c.score, cfg.measure};
            node->parent = parent;
            node->edge = s;
            node->depth = depth;
            result.trace.push_back(
                {depth, describe(s), c.score, static_cast<int>(node->dataset.dim()), node->dataset.dropped_fraction});
            if (node->score.value > best->score.value) best = node;
            next.push_back(std::move(node));
        }
        result.all_levels.push_back(std::move(next));
        bool reducible = std::any_of(result.all_levels.back().begin(), result.all_levels.back().end(),
                                     [](const NodePtr& n) { return n->dataset.dim() > 1; });
        if (!reducible) break;
    }

    for (NodePtr n = best; n; n = n->parent) result.best_path.push_back(n);
    std::reverse(result.best_path.begin(), result.best_path.end());
    return result;
}

ExprDag reconstruct(const SearchNode& node, const ExprDag& solution)
{
    const Dataset& ds = node.dataset;
    ExprDag in_original = solution.substitute(ds.var_map);
    return solve_for(ds.y_map, in_original, ds.original_dim());
}

std::string trace_jsonl(const SearchResult& result)
{
    std::string out;
    for (const auto& r : result.trace) {
        nlohmann::json j = {{"depth", r.depth},
                            {"substitution", r.substitution},
                            {"score", std::isfinite(r.score) ? nlohmann::json(r.score) : nlohmann::json(nullptr)},
                            {"n_vars", r.n_vars},
                            {"rows_dropped", r.rows_dropped}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace dimred

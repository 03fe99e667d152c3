#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <stdexcept>
#include <vector>

#include "detreg/candidates.hpp"
#include "detreg/parallel.hpp"
#include "detreg/similarity.hpp"

namespace detreg {

struct DimensionMismatch : std::logic_error {
    using std::logic_error::logic_error;
};

struct TraceDisabled : std::logic_error {
    using std::logic_error::logic_error;
};

/// Distinguished assignment target: the virtual background exemplar.
inline constexpr int kBackground = -1;

/// Affinity of assigning a point to the background cluster. Choosing
/// background contributes nothing to the objective, while a real exemplar
/// pays its (negative) self-similarity and members contribute their
/// weighted pair similarities.
inline constexpr double kBackgroundAffinity = 0.0;

/// Linear weights of the clustering objective. w_c, w_e and w_f gate
/// hard 0/-inf constraint terms, so any positive value is equivalent;
/// they are accepted for interface fidelity.
struct ObjectiveWeights {
    double w_a = 1.0;  // exemplar self-similarity
    double w_b = 1.0;  // member-to-exemplar similarity
    double w_c = 1.0;  // single-assignment constraint (hard)
    double w_d = 0.2;  // repellence between co-selected exemplars
    double w_e = 1.0;  // exemplar consistency constraint (hard)
    double w_f = 1.0;  // one-label-per-box constraint (hard)
};

inline bool is_valid(const ObjectiveWeights& w) {
    for (double v : {w.w_a, w.w_b, w.w_c, w.w_d, w.w_e, w.w_f})
        if (!(v >= 0.0) || !std::isfinite(v)) return false;
    return true;
}

/// Hard assignment: exemplar_of[i] is a point id (i itself for exemplars)
/// or kBackground.
struct Assignment {
    std::vector<int> exemplar_of;

    std::size_t size() const { return exemplar_of.size(); }
    bool is_exemplar(std::size_t i) const {
        return exemplar_of[i] == static_cast<int>(i);
    }
    bool operator==(const Assignment&) const = default;
};

struct InferenceConfig {
    double damping = 0.5;         // in [0,1)
    int max_iterations = 200;     // >= 1
    int convergence_window = 15;  // exemplar set stable for this many iterations
    bool trace_enabled = false;
};

inline bool is_valid(const InferenceConfig& c) {
    return c.damping >= 0.0 && c.damping < 1.0 && c.max_iterations >= 1 &&
           c.convergence_window >= 1;
}

struct SelectedDetection {
    int point_id = 0;
    int box_id = 0;
    int class_id = 0;
    double score = 0.0;
};

struct RegularizedResult {
    std::vector<SelectedDetection> selected;  // self-assigned non-background points
    Assignment assignment;
    double objective_value = 0.0;
    int iterations_run = 0;
    bool converged = false;
    bool trace_enabled = false;
    std::vector<Assignment> trace;  // snapshot 0 is all-background
};

/// Per-iteration assignment snapshots of a traced run.
inline const std::vector<Assignment>& iteration_trace(const RegularizedResult& r) {
    if (!r.trace_enabled)
        throw TraceDisabled("iteration trace was not recorded for this run");
    return r.trace;
}

namespace detail {

inline bool violates_box_uniqueness(const Assignment& a, const std::vector<int>& box_ids) {
    std::map<int, int> exemplars_per_box;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.is_exemplar(i) && ++exemplars_per_box[box_ids[i]] > 1) return true;
    return false;
}

}  // namespace detail

/// Value of the weighted objective for a hard assignment, or -infinity if
/// any hard constraint (single assignment, exemplar consistency, one label
/// per box) is violated. Background choices contribute kBackgroundAffinity
/// scaled by w_b.
inline double objective_value(const Assignment& a, const SimilarityModel& m,
                              const ObjectiveWeights& w) {
    const std::size_t n = m.size();
    if (a.size() != n)
        throw DimensionMismatch("assignment length " + std::to_string(a.size()) +
                                " does not match model size " + std::to_string(n));
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const int j = a.exemplar_of[i];
        if (j == kBackground) continue;
        if (j < 0 || static_cast<std::size_t>(j) >= n)
            throw DimensionMismatch("assignment entry out of range: " + std::to_string(j));
        if (!a.is_exemplar(static_cast<std::size_t>(j))) return neg_inf;
    }
    if (detail::violates_box_uniqueness(a, m.box_ids())) return neg_inf;

    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int j = a.exemplar_of[i];
        if (j == kBackground)
            value += w.w_b * kBackgroundAffinity;
        else if (static_cast<std::size_t>(j) == i)
            value += w.w_a * m.self(i);
        else
            value += w.w_b * m.pair(i, static_cast<std::size_t>(j));
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!a.is_exemplar(i)) continue;
        for (std::size_t j = i + 1; j < n; ++j)
            if (a.is_exemplar(j)) value += w.w_d * m.repellence(i, j);
    }
    return value;
}

/// Classic clustering objective (no background, no repellence, no box
/// constraint): sum of s(i, exemplar_of[i]) with s(i,i) for exemplars;
/// -infinity if a point is unassigned or joins a non-exemplar.
inline double apc_objective_value(const Assignment& a, const SimilarityModel& m) {
    const std::size_t n = m.size();
    if (a.size() != n)
        throw DimensionMismatch("assignment length does not match model size");
    constexpr double neg_inf = -std::numeric_limits<double>::infinity();
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const int j = a.exemplar_of[i];
        if (j == kBackground || j < 0 || static_cast<std::size_t>(j) >= n) return neg_inf;
        if (static_cast<std::size_t>(j) == i) {
            value += m.self(i);
        } else {
            if (!a.is_exemplar(static_cast<std::size_t>(j))) return neg_inf;
            value += m.pair(i, static_cast<std::size_t>(j));
        }
    }
    return value;
}

namespace detail {

/// Max-sum message passing over the binary exemplar-assignment factor
/// graph. Variables c_ij carry one scalar (value-at-1 minus value-at-0)
/// message per attached factor:
///
///   rho(i,j)   c_ij -> column factor, folded with the row factor
///   alpha(i,j) column factor -> c_ij
///   gamma(i,k) repellence factor {i,k} -> c_ii
///   tau(i)     box at-most-one factor -> c_ii
///
/// The row factor is at-most-one across the row; with a background option
/// the row maximum is floored at the background affinity. All updates are
/// damped and evaluated Jacobi-style per family, so results do not depend
/// on thread count.
class MaxSumEngine {
public:
    struct Options {
        bool use_background = true;
        bool use_box_constraint = true;
        double w_a = 1.0;
        double w_b = 1.0;
        double w_d = 1.0;
    };

    MaxSumEngine(const SimilarityModel& m, const Options& opt,
                 const InferenceConfig& cfg, unsigned threads)
        : m_(m), opt_(opt), cfg_(cfg), threads_(threads), n_(m.size()) {
        rho_.assign(n_ * n_, 0.0);
        alpha_.assign(n_ * n_, 0.0);
        scratch_.assign(n_ * n_, 0.0);
        if (opt_.w_d > 0.0) {
            gamma_.assign(n_ * n_, 0.0);
            gamma_next_.assign(n_ * n_, 0.0);
        }
        tau_.assign(n_, 0.0);
        tau_next_.assign(n_, 0.0);
        if (opt_.use_box_constraint) {
            std::map<int, std::vector<int>> groups;
            for (std::size_t i = 0; i < n_; ++i)
                groups[m.box_ids()[i]].push_back(static_cast<int>(i));
            for (auto& [box, members] : groups)
                if (members.size() > 1) box_groups_.push_back(std::move(members));
        }
    }

    void iterate() {
        update_responsibilities();
        update_availabilities();
        if (opt_.w_d > 0.0) update_repellence();
        if (!box_groups_.empty()) update_box_messages();
    }

    double belief(std::size_t i) const { return rho_[i * n_ + i] + alpha_[i * n_ + i]; }

    /// Exemplar set after the deterministic repair pass: per box only the
    /// highest-belief self-assignment survives (ties to the lower id), and
    /// in classic mode an empty set is repaired by forcing the global
    /// belief argmax so every point can be assigned.
    std::vector<int> decode_exemplars() const {
        std::vector<int> ex;
        for (std::size_t i = 0; i < n_; ++i)
            if (belief(i) > 0.0) ex.push_back(static_cast<int>(i));

        if (!opt_.use_background && ex.empty() && n_ > 0) {
            std::size_t best = 0;
            for (std::size_t i = 1; i < n_; ++i)
                if (belief(i) > belief(best)) best = i;
            ex.push_back(static_cast<int>(best));
        }

        if (opt_.use_box_constraint && !ex.empty()) {
            std::map<int, int> best_per_box;
            for (int i : ex) {
                auto [it, inserted] = best_per_box.emplace(m_.box_ids()[static_cast<std::size_t>(i)], i);
                if (!inserted && belief(static_cast<std::size_t>(i)) >
                                     belief(static_cast<std::size_t>(it->second)))
                    it->second = i;
            }
            std::vector<int> kept;
            kept.reserve(best_per_box.size());
            for (int i : ex) {
                auto it = best_per_box.find(m_.box_ids()[static_cast<std::size_t>(i)]);
                if (it->second == i) kept.push_back(i);
            }
            ex = std::move(kept);
        }
        return ex;
    }

    /// Full assignment for a given exemplar set: each non-exemplar joins
    /// its best exemplar, or background when allowed and no exemplar has a
    /// strictly positive weighted contribution.
    Assignment decode(const std::vector<int>& exemplars) const {
        Assignment a;
        a.exemplar_of.assign(n_, kBackground);
        for (int e : exemplars) a.exemplar_of[static_cast<std::size_t>(e)] = e;
        for (std::size_t i = 0; i < n_; ++i) {
            if (a.exemplar_of[i] == static_cast<int>(i)) continue;
            int best = kBackground;
            double best_contribution = 0.0;
            for (int e : exemplars) {
                const double contribution = opt_.w_b * m_.pair(i, static_cast<std::size_t>(e));
                if (best == kBackground ? contribution > opt_.w_b * kBackgroundAffinity
                                        : contribution > best_contribution) {
                    best = e;
                    best_contribution = contribution;
                }
            }
            if (!opt_.use_background) {
                // No background to fall back on: join the best exemplar
                // regardless of sign (the set is non-empty by repair).
                best = exemplars.front();
                for (int e : exemplars)
                    if (m_.pair(i, static_cast<std::size_t>(e)) >
                        m_.pair(i, static_cast<std::size_t>(best)))
                        best = e;
            }
            a.exemplar_of[i] = best;
        }
        return a;
    }

private:
    double theta(std::size_t i, std::size_t j) const {
        return i == j ? opt_.w_a * m_.self(i) : opt_.w_b * m_.pair(i, j);
    }

    double extras(std::size_t i) const {
        double v = tau_[i];
        if (opt_.w_d > 0.0) {
            const double* row = gamma_.data() + i * n_;
            for (std::size_t k = 0; k < n_; ++k) v += row[k];
        }
        return v;
    }

    void update_responsibilities() {
        const double d = cfg_.damping;
        parallel_for(n_, threads_, [&](std::size_t begin, std::size_t end) {
            std::vector<double> beta(n_);
            for (std::size_t i = begin; i < end; ++i) {
                const double extra_i = extras(i);
                double m1 = -std::numeric_limits<double>::infinity();
                double m2 = m1;
                std::size_t arg1 = 0;
                for (std::size_t q = 0; q < n_; ++q) {
                    double b = theta(i, q) + alpha_[i * n_ + q];
                    if (q == i) b += extra_i;
                    beta[q] = b;
                    if (b > m1) {
                        m2 = m1;
                        m1 = b;
                        arg1 = q;
                    } else if (b > m2) {
                        m2 = b;
                    }
                }
                for (std::size_t j = 0; j < n_; ++j) {
                    double best_other = (j == arg1) ? m2 : m1;
                    if (opt_.use_background)
                        best_other = std::max(opt_.w_b * kBackgroundAffinity, best_other);
                    double fresh = theta(i, j) - best_other;
                    if (j == i) fresh += extra_i;
                    scratch_[i * n_ + j] = d * rho_[i * n_ + j] + (1.0 - d) * fresh;
                }
            }
        });
        std::swap(rho_, scratch_);
    }

    void update_availabilities() {
        const double d = cfg_.damping;
        parallel_for(n_, threads_, [&](std::size_t begin, std::size_t end) {
            for (std::size_t j = begin; j < end; ++j) {
                double total_pos = 0.0;
                for (std::size_t k = 0; k < n_; ++k)
                    if (k != j) total_pos += std::max(rho_[k * n_ + j], 0.0);
                for (std::size_t i = 0; i < n_; ++i) {
                    double fresh;
                    if (i == j) {
                        fresh = total_pos;
                    } else {
                        fresh = std::min(0.0, rho_[j * n_ + j] + total_pos -
                                                  std::max(rho_[i * n_ + j], 0.0));
                    }
                    scratch_[i * n_ + j] = d * alpha_[i * n_ + j] + (1.0 - d) * fresh;
                }
            }
        });
        std::swap(alpha_, scratch_);
    }

    void update_repellence() {
        const double d = cfg_.damping;
        parallel_for(n_, threads_, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                for (std::size_t k = 0; k < n_; ++k) {
                    if (k == i) {
                        gamma_next_[i * n_ + k] = 0.0;
                        continue;
                    }
                    const double delta =
                        rho_[k * n_ + k] + alpha_[k * n_ + k] - gamma_[k * n_ + i];
                    const double fresh = std::max(0.0, delta + opt_.w_d * m_.repellence(i, k)) -
                                         std::max(0.0, delta);
                    gamma_next_[i * n_ + k] = d * gamma_[i * n_ + k] + (1.0 - d) * fresh;
                }
            }
        });
        std::swap(gamma_, gamma_next_);
    }

    void update_box_messages() {
        const double d = cfg_.damping;
        parallel_for(box_groups_.size(), threads_, [&](std::size_t begin, std::size_t end) {
            for (std::size_t g = begin; g < end; ++g) {
                const auto& members = box_groups_[g];
                for (int j : members) {
                    double best = -std::numeric_limits<double>::infinity();
                    for (int l : members) {
                        if (l == j) continue;
                        const std::size_t lu = static_cast<std::size_t>(l);
                        best = std::max(best, rho_[lu * n_ + lu] + alpha_[lu * n_ + lu] - tau_[lu]);
                    }
                    const double fresh = -std::max(0.0, best);
                    tau_next_[static_cast<std::size_t>(j)] =
                        d * tau_[static_cast<std::size_t>(j)] + (1.0 - d) * fresh;
                }
            }
        });
        for (const auto& members : box_groups_)
            for (int j : members)
                tau_[static_cast<std::size_t>(j)] = tau_next_[static_cast<std::size_t>(j)];
    }

    const SimilarityModel& m_;
    Options opt_;
    InferenceConfig cfg_;
    unsigned threads_;
    std::size_t n_;
    std::vector<double> rho_, alpha_, scratch_;
    std::vector<double> gamma_, gamma_next_;
    std::vector<double> tau_, tau_next_;
    std::vector<std::vector<int>> box_groups_;
};

struct RunOutcome {
    Assignment final_assignment;
    int iterations = 0;
    bool converged = false;
    std::vector<Assignment> trace;
};

inline RunOutcome run_message_passing(const SimilarityModel& m,
                                      const MaxSumEngine::Options& opt,
                                      const InferenceConfig& cfg, unsigned threads,
                                      const SimilarityModel* objective_model = nullptr) {
    const std::size_t n = m.size();
    RunOutcome out;
    Assignment all_background;
    all_background.exemplar_of.assign(n, kBackground);
    if (cfg.trace_enabled) out.trace.push_back(all_background);
    if (n == 0) {
        out.final_assignment = all_background;
        out.converged = true;
        if (cfg.trace_enabled) out.trace.push_back(all_background);
        return out;
    }

    MaxSumEngine engine(m, opt, cfg, threads);
    std::vector<int> prev_exemplars;
    int stable_run = 0;
    Assignment last;
    Assignment best;
    double best_value = -std::numeric_limits<double>::infinity();

    for (int t = 1; t <= cfg.max_iterations; ++t) {
        engine.iterate();
        std::vector<int> exemplars = engine.decode_exemplars();
        last = engine.decode(exemplars);
        out.iterations = t;
        if (cfg.trace_enabled) out.trace.push_back(last);

        if (objective_model) {
            const double v = apc_objective_value(last, *objective_model);
            if (v > best_value) {
                best_value = v;
                best = last;
            }
        }

        if (t > 1 && exemplars == prev_exemplars)
            ++stable_run;
        else
            stable_run = 1;
        prev_exemplars = std::move(exemplars);
        if (stable_run >= cfg.convergence_window) {
            out.converged = true;
            break;
        }
    }

    // On non-convergence the classic variant keeps the best-scoring decode
    // seen; the traced variants return the final decode so the last trace
    // snapshot always equals the result.
    if (objective_model && !out.converged && best_value > apc_objective_value(last, *objective_model))
        out.final_assignment = std::move(best);
    else
        out.final_assignment = std::move(last);
    return out;
}

}  // namespace detail

/// Classic affinity propagation on a similarity model: responsibilities
/// and availabilities only, every point ends in some cluster, at least one
/// exemplar is forced. Non-convergence is not an error; the result carries
/// converged=false and the best decoded assignment.
inline RegularizedResult apc_cluster(const SimilarityModel& m, const InferenceConfig& cfg,
                                     unsigned threads = 1) {
    detail::MaxSumEngine::Options opt;
    opt.use_background = false;
    opt.use_box_constraint = false;
    opt.w_a = 1.0;
    opt.w_b = 1.0;
    opt.w_d = 0.0;
    auto run = detail::run_message_passing(m, opt, cfg, threads, &m);

    RegularizedResult r;
    r.assignment = std::move(run.final_assignment);
    r.iterations_run = run.iterations;
    r.converged = run.converged;
    r.trace_enabled = cfg.trace_enabled;
    r.trace = std::move(run.trace);
    r.objective_value = apc_objective_value(r.assignment, m);
    for (std::size_t i = 0; i < m.size(); ++i)
        if (r.assignment.is_exemplar(i))
            r.selected.push_back({static_cast<int>(i), m.box_ids()[i], -1, 0.0});
    return r;
}

/// Multi-class clustering: max-sum over the full factor graph (background
/// option, repellence, one-label-per-box), deterministic repair at decode,
/// optional per-iteration trace starting from the all-background state.
inline RegularizedResult mapc_cluster(const CandidateSet& cands, const SimilarityModel& m,
                                      const ObjectiveWeights& w, const InferenceConfig& cfg,
                                      unsigned threads = 1) {
    if (m.size() != cands.size())
        throw DimensionMismatch("similarity model size does not match candidate set");
    detail::MaxSumEngine::Options opt;
    opt.use_background = true;
    opt.use_box_constraint = true;
    opt.w_a = w.w_a;
    opt.w_b = w.w_b;
    opt.w_d = w.w_d;
    auto run = detail::run_message_passing(m, opt, cfg, threads);

    RegularizedResult r;
    r.assignment = std::move(run.final_assignment);
    r.iterations_run = run.iterations;
    r.converged = run.converged;
    r.trace_enabled = cfg.trace_enabled;
    r.trace = std::move(run.trace);
    r.objective_value = objective_value(r.assignment, m, w);
    for (std::size_t i = 0; i < cands.size(); ++i)
        if (r.assignment.is_exemplar(i)) {
            const auto& p = cands.points[i];
            r.selected.push_back({p.point_id, p.box_id, p.class_id, p.score});
        }
    return r;
}

/// Single-class restriction: points are partitioned by class and each
/// class is clustered independently over an IoU-only similarity with
/// background and repellence (the box constraint is vacuous inside one
/// class). Results are concatenated; no suppression happens across
/// classes.
inline RegularizedResult sapc_cluster(const CandidateSet& cands, const SimilarityParams& params,
                                      const ObjectiveWeights& w, const InferenceConfig& cfg,
                                      unsigned threads = 1) {
    const std::size_t n = cands.size();
    RegularizedResult r;
    r.assignment.exemplar_of.assign(n, kBackground);
    r.trace_enabled = cfg.trace_enabled;
    r.converged = true;

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[cands.points[i].class_id].push_back(i);

    std::vector<std::vector<Assignment>> class_traces;
    for (const auto& [cls, subset] : by_class) {
        SimilarityModel sub = SimilarityModel::build_iou_only(cands, subset, params.theta_bg, threads);
        detail::MaxSumEngine::Options opt;
        opt.use_background = true;
        opt.use_box_constraint = true;  // vacuous: one point per box within a class
        opt.w_a = w.w_a;
        opt.w_b = w.w_b;
        opt.w_d = w.w_d;
        auto run = detail::run_message_passing(sub, opt, cfg, threads);

        for (std::size_t local = 0; local < subset.size(); ++local) {
            const int target = run.final_assignment.exemplar_of[local];
            r.assignment.exemplar_of[subset[local]] =
                target == kBackground ? kBackground : static_cast<int>(subset[static_cast<std::size_t>(target)]);
        }
        r.objective_value += objective_value(run.final_assignment, sub, w);
        r.iterations_run = std::max(r.iterations_run, run.iterations);
        r.converged = r.converged && run.converged;
        if (cfg.trace_enabled) {
            for (auto& snap : run.trace)
                for (int& e : snap.exemplar_of)
                    if (e != kBackground) e = static_cast<int>(subset[static_cast<std::size_t>(e)]);
            class_traces.push_back(std::move(run.trace));
        }
    }

    if (cfg.trace_enabled) {
        std::size_t depth = 1;
        for (const auto& ct : class_traces) depth = std::max(depth, ct.size());
        for (std::size_t t = 0; t < depth; ++t) {
            Assignment snap;
            snap.exemplar_of.assign(n, kBackground);
            std::size_t cls_index = 0;
            for (const auto& [cls, subset] : by_class) {
                const auto& ct = class_traces[cls_index++];
                if (ct.empty()) continue;
                const Assignment& src = ct[std::min(t, ct.size() - 1)];
                for (std::size_t local = 0; local < subset.size(); ++local)
                    snap.exemplar_of[subset[local]] = src.exemplar_of[local];
            }
            r.trace.push_back(std::move(snap));
        }
    }

    for (std::size_t i = 0; i < n; ++i)
        if (r.assignment.is_exemplar(i)) {
            const auto& p = cands.points[i];
            r.selected.push_back({p.point_id, p.box_id, p.class_id, p.score});
        }
    return r;
}

}  // namespace detreg

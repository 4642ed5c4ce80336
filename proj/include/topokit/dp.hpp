#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "topokit/emission.hpp"
#include "topokit/errors.hpp"
#include "topokit/fsa.hpp"
#include "topokit/numeric.hpp"

namespace topokit {

// Loop/forward log-probabilities, normalized per entry so that
// exp(loop) + exp(forward) = 1. Mode None carries no transition factors at
// all (the CTC convention).
struct TransitionModel {
    enum class Mode { None, Global, PerLabel };

    Mode mode = Mode::None;
    double loop_lp = 0.0;
    double forward_lp = 0.0;
    std::vector<double> loop_per_label;
    std::vector<double> forward_per_label;

    static TransitionModel none() { return {}; }

    static TransitionModel global(double loop_prob) {
        if (!(loop_prob > 0.0 && loop_prob < 1.0))
            throw Error("loop probability must be in (0,1)");
        TransitionModel t;
        t.mode = Mode::Global;
        t.loop_lp = std::log(loop_prob);
        t.forward_lp = std::log1p(-loop_prob);
        return t;
    }

    // The simple variant: loop = forward = 0.5 for all labels. The kernel
    // detects this case and drops the constant from the DP entirely.
    static TransitionModel uniform() { return global(0.5); }

    static TransitionModel per_label(const std::vector<double>& loop_probs) {
        TransitionModel t;
        t.mode = Mode::PerLabel;
        t.loop_per_label.reserve(loop_probs.size());
        t.forward_per_label.reserve(loop_probs.size());
        for (double p : loop_probs) {
            if (!(p > 0.0 && p < 1.0)) throw Error("loop probability must be in (0,1)");
            t.loop_per_label.push_back(std::log(p));
            t.forward_per_label.push_back(std::log1p(-p));
        }
        return t;
    }

    double loop_logprob(LabelId l) const {
        switch (mode) {
            case Mode::None: return 0.0;
            case Mode::Global: return loop_lp;
            case Mode::PerLabel: return loop_per_label.at(static_cast<std::size_t>(l));
        }
        return 0.0;
    }

    double forward_logprob(LabelId l) const {
        switch (mode) {
            case Mode::None: return 0.0;
            case Mode::Global: return forward_lp;
            case Mode::PerLabel: return forward_per_label.at(static_cast<std::size_t>(l));
        }
        return 0.0;
    }

    // True when every transition factor is the same constant, so it can be
    // pulled out of the DP (T factors per path: entry plus T-1 arcs).
    bool constant() const {
        if (mode == Mode::None) return true;
        if (mode == Mode::Global) return loop_lp == forward_lp;
        return false;
    }

    double constant_value() const { return mode == Mode::None ? 0.0 : loop_lp; }

    void validate(std::size_t num_labels) const {
        if (mode == Mode::Global) {
            if (std::abs(std::exp(loop_lp) + std::exp(forward_lp) - 1.0) > 1e-6)
                throw Error("transition model not normalized over loop and forward");
        } else if (mode == Mode::PerLabel) {
            if (loop_per_label.size() != num_labels)
                throw DimensionError("per-label transition model size mismatch");
            for (std::size_t i = 0; i < loop_per_label.size(); ++i)
                if (std::abs(std::exp(loop_per_label[i]) + std::exp(forward_per_label[i]) - 1.0) > 1e-6)
                    throw Error("transition entry " + std::to_string(i) + " not normalized");
        }
    }
};

// The scales entering the expectation step and the decision rules:
// label_scale on log-posteriors, transition_scale on loop/forward scores,
// prior_scale on prior/ILM subtraction, lm_scale on the language model.
struct ScaleConfig {
    double label_scale = 1.0;
    double transition_scale = 1.0;
    double prior_scale = 0.0;
    double lm_scale = 0.0;

    void validate() const {
        if (!(label_scale > 0.0)) throw Error("label scale must be positive");
        if (!std::isfinite(transition_scale) || !std::isfinite(prior_scale) || !std::isfinite(lm_scale))
            throw Error("scales must be finite");
    }
};

// Posterior state occupancies from the forward-backward pass.
struct Occupancies {
    MatrixD state;  // T x S, rows sum to 1 over reachable states
    MatrixD label;  // T x L, state occupancies pooled by emission label
};

struct ForwardBackwardResult {
    double loss = 0.0;
    Occupancies occ;
};

struct ViterbiResult {
    AlignmentPath path;
    double score = 0.0;  // max over paths of the scaled path score
};

struct GradientResult {
    double loss = 0.0;
    MatrixD grad;  // d loss / d logits, T x L
};

namespace detail {

// Emission accessors let the same DP run over float file matrices and
// double logit matrices without copies.
struct EmAccess {
    const EmissionMatrix* m;
    double operator()(std::size_t t, LabelId l) const { return m->at(t, static_cast<std::size_t>(l)); }
    std::size_t frames() const { return m->T; }
    std::size_t labels() const { return m->L; }
};

struct MatAccess {
    const MatrixD* m;
    double operator()(std::size_t t, LabelId l) const { return m->at(t, static_cast<std::size_t>(l)); }
    std::size_t frames() const { return m->rows; }
    std::size_t labels() const { return m->cols; }
};

struct DpSetup {
    double alpha = 1.0;
    double beta = 1.0;
    bool hoisted = false;      // constant transitions removed from the DP
    double hoist_total = 0.0;  // T * beta * constant, re-added to loss/score

    const TransitionModel* trans = nullptr;

    double arc_score(const AlignmentFsa::Arc& a, const AlignmentFsa& fsa) const {
        if (hoisted) return 0.0;
        const LabelId src = fsa.states[static_cast<std::size_t>(a.from)].label;
        return beta * (a.kind == ArcKind::Loop ? trans->loop_logprob(src) : trans->forward_logprob(src));
    }

    double entry_score(std::int32_t s, const AlignmentFsa& fsa) const {
        if (hoisted) return 0.0;
        return beta * trans->forward_logprob(fsa.states[static_cast<std::size_t>(s)].label);
    }
};

template <class Em>
DpSetup make_setup(const AlignmentFsa& fsa, const Em& em, const TransitionModel& trans,
                   const ScaleConfig& scales) {
    scales.validate();
    trans.validate(em.labels());
    for (const auto& st : fsa.states)
        if (st.label < 0 || static_cast<std::size_t>(st.label) >= em.labels())
            throw DimensionError("FSA emits label " + std::to_string(st.label) +
                                 " outside the emission matrix's " + std::to_string(em.labels()) +
                                 " columns");
    if (em.frames() < static_cast<std::size_t>(fsa.min_path_length()))
        throw NoPathError("no valid path: T=" + std::to_string(em.frames()) +
                          " below minimum path length " + std::to_string(fsa.min_path_length()));
    DpSetup s;
    s.alpha = scales.label_scale;
    s.beta = scales.transition_scale;
    s.trans = &trans;
    if (trans.constant()) {
        s.hoisted = true;
        s.hoist_total = static_cast<double>(em.frames()) * s.beta * trans.constant_value();
    }
    return s;
}

template <class Em>
void forward_pass(const AlignmentFsa& fsa, const Em& em, const DpSetup& setup, MatrixD& fwd) {
    const std::size_t T = em.frames();
    const std::size_t S = fsa.num_states();
    fwd = MatrixD(T, S, kLogZero);
    for (auto s : fsa.initial)
        fwd.at(0, static_cast<std::size_t>(s)) =
                setup.alpha * em(0, fsa.states[static_cast<std::size_t>(s)].label) +
                setup.entry_score(s, fsa);
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t s = 0; s < S; ++s) {
            double acc = kLogZero;
            for (auto ai : fsa.in_arcs(static_cast<std::int32_t>(s))) {
                const auto& arc = fsa.arcs[static_cast<std::size_t>(ai)];
                const double prev = fwd.at(t - 1, static_cast<std::size_t>(arc.from));
                if (prev == kLogZero) continue;
                acc = log_add(acc, prev + setup.arc_score(arc, fsa));
            }
            if (acc != kLogZero)
                fwd.at(t, s) = acc + setup.alpha * em(t, fsa.states[s].label);
        }
    }
}

template <class Em>
double final_log_sum(const AlignmentFsa& fsa, const Em& em, const MatrixD& fwd) {
    const std::size_t T = em.frames();
    double z = kLogZero;
    for (auto s : fsa.finals) z = log_add(z, fwd.at(T - 1, static_cast<std::size_t>(s)));
    return z;
}

template <class Em>
void backward_pass(const AlignmentFsa& fsa, const Em& em, const DpSetup& setup, MatrixD& bwd) {
    const std::size_t T = em.frames();
    const std::size_t S = fsa.num_states();
    bwd = MatrixD(T, S, kLogZero);
    for (auto s : fsa.finals) bwd.at(T - 1, static_cast<std::size_t>(s)) = 0.0;
    for (std::size_t t = T - 1; t-- > 0;) {
        for (std::size_t s = 0; s < S; ++s) {
            double acc = kLogZero;
            for (auto ai : fsa.out_arcs(static_cast<std::int32_t>(s))) {
                const auto& arc = fsa.arcs[static_cast<std::size_t>(ai)];
                const double nxt = bwd.at(t + 1, static_cast<std::size_t>(arc.to));
                if (nxt == kLogZero) continue;
                acc = log_add(acc, setup.arc_score(arc, fsa) +
                                           setup.alpha * em(t + 1, arc.label) + nxt);
            }
            bwd.at(t, s) = acc;
        }
    }
}

template <class Em>
double full_sum_impl(const AlignmentFsa& fsa, const Em& em, const TransitionModel& trans,
                     const ScaleConfig& scales) {
    const DpSetup setup = make_setup(fsa, em, trans, scales);
    MatrixD fwd;
    forward_pass(fsa, em, setup, fwd);
    const double z = final_log_sum(fsa, em, fwd);
    if (z == kLogZero) throw NoPathError("no valid path through the alignment FSA");
    return -(z + setup.hoist_total);
}

template <class Em>
ForwardBackwardResult forward_backward_impl(const AlignmentFsa& fsa, const Em& em,
                                            const TransitionModel& trans, const ScaleConfig& scales) {
    const DpSetup setup = make_setup(fsa, em, trans, scales);
    const std::size_t T = em.frames();
    const std::size_t S = fsa.num_states();
    MatrixD fwd, bwd;
    forward_pass(fsa, em, setup, fwd);
    const double z = final_log_sum(fsa, em, fwd);
    if (z == kLogZero) throw NoPathError("no valid path through the alignment FSA");
    backward_pass(fsa, em, setup, bwd);

    ForwardBackwardResult r;
    r.loss = -(z + setup.hoist_total);
    r.occ.state = MatrixD(T, S, 0.0);
    r.occ.label = MatrixD(T, em.labels(), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t s = 0; s < S; ++s) {
            const double a = fwd.at(t, s);
            const double b = bwd.at(t, s);
            if (a == kLogZero || b == kLogZero) continue;
            const double g = std::exp(a + b - z);
            r.occ.state.at(t, s) = g;
            r.occ.label.at(t, static_cast<std::size_t>(fsa.states[s].label)) += g;
        }
    }
    return r;
}

template <class Em>
ViterbiResult viterbi_impl(const AlignmentFsa& fsa, const Em& em, const TransitionModel& trans,
                           const ScaleConfig& scales) {
    const DpSetup setup = make_setup(fsa, em, trans, scales);
    const std::size_t T = em.frames();
    const std::size_t S = fsa.num_states();
    MatrixD best(T, S, kLogZero);
    std::vector<std::int32_t> bp(T * S, -1);
    for (auto s : fsa.initial)
        best.at(0, static_cast<std::size_t>(s)) =
                setup.alpha * em(0, fsa.states[static_cast<std::size_t>(s)].label) +
                setup.entry_score(s, fsa);
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t s = 0; s < S; ++s) {
            double acc = kLogZero;
            std::int32_t arg = -1;
            // in-arcs are sorted by source state, so on ties the lowest
            // predecessor id wins
            for (auto ai : fsa.in_arcs(static_cast<std::int32_t>(s))) {
                const auto& arc = fsa.arcs[static_cast<std::size_t>(ai)];
                const double prev = best.at(t - 1, static_cast<std::size_t>(arc.from));
                if (prev == kLogZero) continue;
                const double cand = prev + setup.arc_score(arc, fsa);
                if (cand > acc) {
                    acc = cand;
                    arg = arc.from;
                }
            }
            if (acc != kLogZero) {
                best.at(t, s) = acc + setup.alpha * em(t, fsa.states[s].label);
                bp[t * S + s] = arg;
            }
        }
    }
    double top = kLogZero;
    std::int32_t end_state = -1;
    for (auto s : fsa.finals) {  // sorted: lowest final id wins ties
        const double v = best.at(T - 1, static_cast<std::size_t>(s));
        if (v > top) {
            top = v;
            end_state = s;
        }
    }
    if (end_state < 0) throw NoPathError("no valid path through the alignment FSA");

    ViterbiResult r;
    r.score = top + setup.hoist_total;
    r.path.states.resize(T);
    r.path.labels.resize(T);
    std::int32_t s = end_state;
    for (std::size_t t = T; t-- > 0;) {
        r.path.states[t] = s;
        r.path.labels[t] = fsa.states[static_cast<std::size_t>(s)].label;
        if (t > 0) s = bp[t * S + static_cast<std::size_t>(s)];
    }
    return r;
}

}  // namespace detail

// -log of the path-sum under scaled emissions and transitions (the full-sum
// criterion), by the forward algorithm in the log semiring.
inline double full_sum_loss(const AlignmentFsa& fsa, const EmissionMatrix& em,
                            const TransitionModel& trans, const ScaleConfig& scales) {
    return detail::full_sum_impl(fsa, detail::EmAccess{&em}, trans, scales);
}

inline double full_sum_loss(const AlignmentFsa& fsa, const MatrixD& log_probs,
                            const TransitionModel& trans, const ScaleConfig& scales) {
    return detail::full_sum_impl(fsa, detail::MatAccess{&log_probs}, trans, scales);
}

// Same loss as full_sum_loss on per-frame log-softmax of the logits.
inline double full_sum_loss_from_logits(const AlignmentFsa& fsa, const MatrixD& logits,
                                        const TransitionModel& trans, const ScaleConfig& scales) {
    const MatrixD lp = log_softmax_copy(logits);
    return detail::full_sum_impl(fsa, detail::MatAccess{&lp}, trans, scales);
}

inline ForwardBackwardResult forward_backward(const AlignmentFsa& fsa, const EmissionMatrix& em,
                                              const TransitionModel& trans, const ScaleConfig& scales) {
    return detail::forward_backward_impl(fsa, detail::EmAccess{&em}, trans, scales);
}

inline ForwardBackwardResult forward_backward(const AlignmentFsa& fsa, const MatrixD& log_probs,
                                              const TransitionModel& trans, const ScaleConfig& scales) {
    return detail::forward_backward_impl(fsa, detail::MatAccess{&log_probs}, trans, scales);
}

// Gradient of the full-sum loss with respect to pre-softmax logits:
//   d loss / d logit[t,l] = alpha * (softmax(logit_t)[l] - occupancy[t,l]).
inline GradientResult full_sum_gradient(const AlignmentFsa& fsa, const MatrixD& logits,
                                        const TransitionModel& trans, const ScaleConfig& scales) {
    const MatrixD lp = log_softmax_copy(logits);
    ForwardBackwardResult fb = detail::forward_backward_impl(fsa, detail::MatAccess{&lp}, trans, scales);
    GradientResult r;
    r.loss = fb.loss;
    r.grad = MatrixD(lp.rows, lp.cols, 0.0);
    for (std::size_t t = 0; t < lp.rows; ++t)
        for (std::size_t l = 0; l < lp.cols; ++l)
            r.grad.at(t, l) = scales.label_scale * (std::exp(lp.at(t, l)) - fb.occ.label.at(t, l));
    return r;
}

inline ViterbiResult viterbi(const AlignmentFsa& fsa, const EmissionMatrix& em,
                             const TransitionModel& trans, const ScaleConfig& scales) {
    return detail::viterbi_impl(fsa, detail::EmAccess{&em}, trans, scales);
}

inline ViterbiResult viterbi(const AlignmentFsa& fsa, const MatrixD& log_probs,
                             const TransitionModel& trans, const ScaleConfig& scales) {
    return detail::viterbi_impl(fsa, detail::MatAccess{&log_probs}, trans, scales);
}

// Frame-wise cross-entropy against a fixed alignment: mean over frames of
// -log softmax(logits_t)[label_t].
inline double frame_ce_loss(std::span<const LabelId> alignment, const MatrixD& logits) {
    if (alignment.size() != logits.rows)
        throw DimensionError("alignment length does not match logit frames");
    double total = 0.0;
    for (std::size_t t = 0; t < logits.rows; ++t) {
        const LabelId y = alignment[t];
        if (y < 0 || static_cast<std::size_t>(y) >= logits.cols)
            throw DimensionError("label id out of range at frame " + std::to_string(t));
        total += log_sum_exp(logits.row(t)) - logits.at(t, static_cast<std::size_t>(y));
    }
    return total / static_cast<double>(logits.rows);
}

inline double frame_ce_loss(const AlignmentPath& path, const MatrixD& logits) {
    return frame_ce_loss(std::span<const LabelId>(path.labels), logits);
}

}  // namespace topokit

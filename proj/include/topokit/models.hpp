#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "topokit/dp.hpp"
#include "topokit/emission.hpp"
#include "topokit/errors.hpp"
#include "topokit/fsa.hpp"
#include "topokit/lexicon.hpp"
#include "topokit/numeric.hpp"

namespace topokit {

// Zero-order label posteriors: just the emission matrix over the topology's
// label set.
struct ZeroOrderScores {
    EmissionMatrix em;
};

// Factored first-order (diphone) posteriors:
//   center_given_left[t][left][center] = log P(center | left, frame t)
//   left_posterior[t][left]            = log P(left | frame t)
// Both axes run over the full inventory (silence is a context like any label).
struct FirstOrderFHScores {
    std::uint32_t T = 0;
    std::uint32_t L = 0;
    float frame_shift_ms = 10.0f;
    std::vector<double> center_given_left;  // T*L*L
    std::vector<double> left_posterior;     // T*L

    double cgl(std::size_t t, LabelId left, LabelId center) const {
        return center_given_left[(t * L + static_cast<std::size_t>(left)) * L +
                                 static_cast<std::size_t>(center)];
    }
    double& cgl(std::size_t t, LabelId left, LabelId center) {
        return center_given_left[(t * L + static_cast<std::size_t>(left)) * L +
                                 static_cast<std::size_t>(center)];
    }
    double left(std::size_t t, LabelId l) const { return left_posterior[t * L + static_cast<std::size_t>(l)]; }
    double& left(std::size_t t, LabelId l) { return left_posterior[t * L + static_cast<std::size_t>(l)]; }

    void validate() const {
        if (center_given_left.size() != std::size_t(T) * L * L || left_posterior.size() != std::size_t(T) * L)
            throw DimensionError("FH score table size mismatch");
        for (std::size_t t = 0; t < T; ++t) {
            std::span<const double> lp{left_posterior.data() + t * L, L};
            if (std::abs(log_sum_exp(lp)) > 1e-6)
                throw Error("FH left posterior row not normalized at frame " + std::to_string(t));
            for (std::size_t l = 0; l < L; ++l) {
                std::span<const double> row{center_given_left.data() + (t * L + l) * L, L};
                if (std::abs(log_sum_exp(row)) > 1e-6)
                    throw Error("FH conditional slice not normalized at frame " + std::to_string(t));
            }
        }
    }
};

// Strictly monotonic transducer posteriors:
//   label_given_context[t][ctx][out] = log P(out | ctx, frame t)
// The output axis is the full inventory including blank; the context axis
// reuses the inventory with the blank slot standing for "no previous label".
struct MRnnTScores {
    std::uint32_t T = 0;
    std::uint32_t L = 0;
    float frame_shift_ms = 10.0f;
    std::vector<double> label_given_context;  // T*L*L

    double lgc(std::size_t t, LabelId ctx, LabelId out) const {
        return label_given_context[(t * L + static_cast<std::size_t>(ctx)) * L +
                                   static_cast<std::size_t>(out)];
    }
    double& lgc(std::size_t t, LabelId ctx, LabelId out) {
        return label_given_context[(t * L + static_cast<std::size_t>(ctx)) * L +
                                   static_cast<std::size_t>(out)];
    }

    void validate() const {
        if (label_given_context.size() != std::size_t(T) * L * L)
            throw DimensionError("mRNN-T score table size mismatch");
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t c = 0; c < L; ++c) {
                std::span<const double> row{label_given_context.data() + (t * L + c) * L, L};
                if (std::abs(log_sum_exp(row)) > 1e-6)
                    throw Error("mRNN-T slice not normalized at frame " + std::to_string(t));
            }
    }
};

// Context-dependent diphone prior P(center, left), jointly normalized and
// additively smoothed so no cell is -inf.
struct PriorTable {
    std::size_t L = 0;
    double epsilon = 0.0;
    std::vector<double> logp;  // L*L, [left][center]

    double at(LabelId left, LabelId center) const {
        if (left < 0 || center < 0 || static_cast<std::size_t>(left) >= L ||
            static_cast<std::size_t>(center) >= L)
            throw DimensionError("prior table index out of range");
        return logp[static_cast<std::size_t>(left) * L + static_cast<std::size_t>(center)];
    }

    void validate() const {
        if (logp.size() != L * L) throw DimensionError("prior table size mismatch");
        if (std::abs(log_sum_exp(logp)) > 1e-6) throw Error("prior table not normalized");
        for (double v : logp)
            if (v == kLogZero) throw Error("prior table has a -inf cell; smooth with epsilon > 0");
    }
};

// Internal LM estimates. zero_order holds L log-probs; first_order holds a
// ctx x out table matching MRnnTScores axes. Either may be empty.
struct IlmTable {
    std::vector<double> zero_order;
    MatrixD first_order;

    double zero(LabelId l) const {
        if (l < 0 || static_cast<std::size_t>(l) >= zero_order.size())
            throw DimensionError("zero-order ILM index out of range");
        return zero_order[static_cast<std::size_t>(l)];
    }
    double first(LabelId ctx, LabelId out) const {
        if (ctx < 0 || out < 0 || static_cast<std::size_t>(ctx) >= first_order.rows ||
            static_cast<std::size_t>(out) >= first_order.cols)
            throw DimensionError("first-order ILM index out of range");
        return first_order.at(static_cast<std::size_t>(ctx), static_cast<std::size_t>(out));
    }
};

// --- decision-rule score assembly --------------------------------------

// Eq-style FH joint: log P(center|left,t) + log P(left|t) - gamma * log prior.
// P(h_t) is a decision-rule constant and is dropped.
inline double fh_joint_score(const FirstOrderFHScores& fh, const PriorTable& prior, std::size_t t,
                             LabelId left, LabelId center, const ScaleConfig& scales) {
    if (t >= fh.T || left < 0 || center < 0 || static_cast<std::uint32_t>(left) >= fh.L ||
        static_cast<std::uint32_t>(center) >= fh.L)
        throw DimensionError("fh_joint_score index out of range");
    double s = fh.cgl(t, left, center) + fh.left(t, left);
    if (scales.prior_scale != 0.0) s -= scales.prior_scale * prior.at(left, center);
    return s;
}

// Zero-order per-frame hypothesis increment: scaled posterior, minus scaled
// ILM, plus the loop/forward transition selected by prev_state_same. The
// transition table is indexed by the source state's label (prev_label);
// kNoLabel marks utterance entry, which charges forward of the entered
// label. CTC callers pass TransitionModel::none(), dropping the term.
inline double zero_order_hyp_score(const ZeroOrderScores& scores, const IlmTable* ilm,
                                   const TransitionModel& trans, std::size_t t, LabelId label,
                                   bool prev_state_same, const ScaleConfig& scales,
                                   LabelId prev_label = kNoLabel) {
    if (t >= scores.em.T || label < 0 || static_cast<std::uint32_t>(label) >= scores.em.L)
        throw DimensionError("zero_order_hyp_score index out of range");
    double s = scales.label_scale * scores.em.at(t, static_cast<std::size_t>(label));
    if (ilm && scales.prior_scale != 0.0) s -= scales.prior_scale * ilm->zero(label);
    const LabelId src = prev_state_same ? label : (prev_label == kNoLabel ? label : prev_label);
    s += scales.transition_scale *
         (prev_state_same ? trans.loop_logprob(src) : trans.forward_logprob(src));
    return s;
}

// mRNN-T per-frame increment: conditional posterior minus scaled first-order
// ILM. Blank advances time without changing the context.
inline double mrnnt_hyp_score(const MRnnTScores& scores, const IlmTable* ilm, std::size_t t,
                              LabelId ctx, LabelId out, const ScaleConfig& scales) {
    if (t >= scores.T || ctx < 0 || out < 0 || static_cast<std::uint32_t>(ctx) >= scores.L ||
        static_cast<std::uint32_t>(out) >= scores.L)
        throw DimensionError("mrnnt_hyp_score index out of range");
    double s = scores.lgc(t, ctx, out);
    if (ilm && scales.prior_scale != 0.0) s -= scales.prior_scale * ilm->first(ctx, out);
    return s;
}

// --- estimation ---------------------------------------------------------

// Diphone prior estimation. Alignment streams contribute one (left, center)
// count per frame, with left = label of the previous segment (the special
// label at utterance start). Occupancy streams contribute expected counts
// with position-based contexts (optional silence insertions are not visible
// in a state marginal).
class PriorEstimator {
public:
    PriorEstimator(std::size_t num_labels, double epsilon)
            : L_(num_labels), epsilon_(epsilon), counts_(num_labels * num_labels, 0.0) {}

    void add_alignment(std::span<const LabelId> labels, const LabelInventory& inv) {
        if (labels.empty()) return;
        LabelId left = inv.special_id();
        for (std::size_t t = 0; t < labels.size(); ++t) {
            if (t > 0 && labels[t] != labels[t - 1]) left = labels[t - 1];
            bump(left, labels[t], 1.0);
        }
        frames_ += labels.size();
    }

    void add_occupancies(const AlignmentFsa& fsa, const Occupancies& occ,
                         const LabelInventory& inv) {
        const std::size_t S = fsa.num_states();
        // Builders lay out states in positional order, so a scan carries the
        // preceding phoneme into silence/blank states.
        std::vector<LabelId> left_of(S, inv.special_id());
        LabelId last_phone = inv.special_id();
        for (std::size_t s = 0; s < S; ++s) {
            const auto& st = fsa.states[s];
            left_of[s] = last_phone;
            if (st.kind == AlignmentFsa::StateKind::Phone) last_phone = st.label;
        }
        for (std::size_t t = 0; t < occ.state.rows; ++t)
            for (std::size_t s = 0; s < S; ++s) {
                const double g = occ.state.at(t, s);
                if (g > 0.0) bump(left_of[s], fsa.states[s].label, g);
            }
        frames_ += occ.state.rows;
    }

    PriorTable finish() const {
        if (frames_ == 0) throw Error("prior estimation needs at least one frame");
        PriorTable p;
        p.L = L_;
        p.epsilon = epsilon_;
        p.logp.resize(L_ * L_);
        double total = 0.0;
        for (double c : counts_) total += c + epsilon_;
        for (std::size_t i = 0; i < counts_.size(); ++i) {
            const double mass = counts_[i] + epsilon_;
            if (mass <= 0.0)
                throw Error("prior cell with zero count; pass epsilon > 0 to smooth");
            p.logp[i] = std::log(mass / total);
        }
        return p;
    }

private:
    void bump(LabelId left, LabelId center, double w) {
        counts_[static_cast<std::size_t>(left) * L_ + static_cast<std::size_t>(center)] += w;
    }

    std::size_t L_;
    double epsilon_;
    std::vector<double> counts_;
    std::size_t frames_ = 0;
};

// Internal LM estimation by posterior averaging over the corpus.
class IlmEstimator {
public:
    explicit IlmEstimator(std::size_t num_labels) : L_(num_labels) {}

    void add_zero_order(const EmissionMatrix& em) {
        if (em.L != L_) throw DimensionError("ILM accumulator label count mismatch");
        if (zero_sum_.empty()) zero_sum_.assign(L_, 0.0);
        for (std::size_t t = 0; t < em.T; ++t)
            for (std::size_t l = 0; l < L_; ++l) zero_sum_[l] += std::exp(em.at(t, l));
        zero_frames_ += em.T;
    }

    void add_first_order(const MRnnTScores& s) {
        if (s.L != L_) throw DimensionError("ILM accumulator label count mismatch");
        if (first_sum_.rows == 0) first_sum_ = MatrixD(L_, L_, 0.0);
        for (std::size_t t = 0; t < s.T; ++t)
            for (std::size_t c = 0; c < L_; ++c)
                for (std::size_t o = 0; o < L_; ++o)
                    first_sum_.at(c, o) += std::exp(s.lgc(t, static_cast<LabelId>(c),
                                                          static_cast<LabelId>(o)));
        first_frames_ += s.T;
    }

    IlmTable finish(double epsilon = 0.0) const {
        if (zero_frames_ == 0 && first_frames_ == 0) throw Error("ILM estimation over an empty corpus");
        IlmTable t;
        if (zero_frames_ > 0) {
            t.zero_order.resize(L_);
            double total = 0.0;
            for (double v : zero_sum_) total += v + epsilon;
            for (std::size_t l = 0; l < L_; ++l)
                t.zero_order[l] = std::log((zero_sum_[l] + epsilon) / total);
        }
        if (first_frames_ > 0) {
            t.first_order = MatrixD(L_, L_, 0.0);
            for (std::size_t c = 0; c < L_; ++c) {
                double total = 0.0;
                for (std::size_t o = 0; o < L_; ++o) total += first_sum_.at(c, o) + epsilon;
                for (std::size_t o = 0; o < L_; ++o)
                    t.first_order.at(c, o) =
                            total > 0.0 ? std::log((first_sum_.at(c, o) + epsilon) / total) : kLogZero;
            }
        }
        return t;
    }

private:
    std::size_t L_;
    std::vector<double> zero_sum_;
    MatrixD first_sum_;
    std::size_t zero_frames_ = 0;
    std::size_t first_frames_ = 0;
};

// --- table serialization -------------------------------------------------
// Tables reuse the emission text format with a tag line in front declaring
// the shape semantics: PRIOR2D, ILM1D or ILM2D.

namespace detail {

inline void write_tagged_matrix(std::ostream& out, const std::string& tag, std::size_t rows,
                                std::size_t cols, std::span<const double> values) {
    out << tag << '\n';
    EmissionMatrix em(static_cast<std::uint32_t>(rows), static_cast<std::uint32_t>(cols), 0.0f, false);
    for (std::size_t i = 0; i < values.size(); ++i) em.scores[i] = static_cast<float>(values[i]);
    write_emission_text(out, em);
}

}  // namespace detail

inline void write_prior(std::ostream& out, const PriorTable& p) {
    detail::write_tagged_matrix(out, "PRIOR2D", p.L, p.L, p.logp);
}

inline PriorTable read_prior(std::istream& in) {
    std::string tag;
    if (!(in >> tag)) throw ParseError("missing table tag line");
    if (tag != "PRIOR2D") throw ParseError("expected PRIOR2D tag, found " + tag);
    EmissionMatrix em = read_emission_text(in);
    if (em.T != em.L) throw ParseError("PRIOR2D table must be square");
    PriorTable p;
    p.L = em.L;
    p.logp.assign(em.scores.begin(), em.scores.end());
    return p;
}

inline void write_ilm(std::ostream& out, const IlmTable& t) {
    if (!t.zero_order.empty())
        detail::write_tagged_matrix(out, "ILM1D", 1, t.zero_order.size(), t.zero_order);
    if (t.first_order.rows > 0)
        detail::write_tagged_matrix(out, "ILM2D", t.first_order.rows, t.first_order.cols,
                                    t.first_order.v);
}

inline IlmTable read_ilm(std::istream& in) {
    IlmTable t;
    std::string tag;
    while (in >> tag) {
        EmissionMatrix em = read_emission_text(in);
        if (tag == "ILM1D") {
            if (em.T != 1) throw ParseError("ILM1D table must have one row");
            t.zero_order.assign(em.scores.begin(), em.scores.end());
        } else if (tag == "ILM2D") {
            t.first_order = MatrixD(em.T, em.L);
            for (std::size_t i = 0; i < em.scores.size(); ++i) t.first_order.v[i] = em.scores[i];
        } else {
            throw ParseError("unknown table tag " + tag);
        }
    }
    if (t.zero_order.empty() && t.first_order.rows == 0) throw ParseError("empty ILM table file");
    return t;
}

}  // namespace topokit

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "topokit/errors.hpp"
#include "topokit/lm.hpp"
#include "topokit/models.hpp"
#include "topokit/prefix_tree.hpp"

namespace topokit {

enum class ModelKind { CtcZero, PhmmZero, FactoredHybrid, MRnnT };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::CtcZero: return "ctc";
        case ModelKind::PhmmZero: return "phmm";
        case ModelKind::FactoredHybrid: return "fh";
        case ModelKind::MRnnT: return "mrnnt";
    }
    return "?";
}

// Everything the decoder needs to score one utterance under one decision
// rule. Exactly one of zero/fh/rnnt is set, per kind; prior and ilm are
// required only when prior_scale != 0.
struct DecodeModel {
    ModelKind kind = ModelKind::PhmmZero;
    const ZeroOrderScores* zero = nullptr;
    const FirstOrderFHScores* fh = nullptr;
    const MRnnTScores* rnnt = nullptr;
    const PriorTable* prior = nullptr;
    const IlmTable* ilm = nullptr;
    const TransitionModel* trans = nullptr;  // P-HMM / FH; null means none
    const LabelInventory* inventory = nullptr;

    std::size_t frames() const {
        switch (kind) {
            case ModelKind::CtcZero:
            case ModelKind::PhmmZero: return zero->em.T;
            case ModelKind::FactoredHybrid: return fh->T;
            case ModelKind::MRnnT: return rnnt->T;
        }
        return 0;
    }

    float frame_shift_ms() const {
        switch (kind) {
            case ModelKind::CtcZero:
            case ModelKind::PhmmZero: return zero->em.frame_shift_ms;
            case ModelKind::FactoredHybrid: return fh->frame_shift_ms;
            case ModelKind::MRnnT: return rnnt->frame_shift_ms;
        }
        return 0.0f;
    }

    std::size_t label_count() const {
        switch (kind) {
            case ModelKind::CtcZero:
            case ModelKind::PhmmZero: return zero->em.L;
            case ModelKind::FactoredHybrid: return fh->L;
            case ModelKind::MRnnT: return rnnt->L;
        }
        return 0;
    }

    void validate(const ScaleConfig& scales) const {
        if (!inventory) throw DimensionError("decode model needs a label inventory");
        const bool blank_kind = kind == ModelKind::CtcZero || kind == ModelKind::MRnnT;
        if (blank_kind && !inventory->blank_id())
            throw DimensionError("blank topology decode needs an inventory with blank");
        if (!blank_kind && !inventory->silence_id())
            throw DimensionError("HMM topology decode needs an inventory with silence");
        switch (kind) {
            case ModelKind::CtcZero:
            case ModelKind::PhmmZero:
                if (!zero) throw DimensionError("zero-order decode needs emission scores");
                if (scales.prior_scale != 0.0 && (!ilm || ilm->zero_order.empty()))
                    throw DimensionError("zero-order decode with prior_scale needs a zero-order ILM");
                break;
            case ModelKind::FactoredHybrid:
                if (!fh) throw DimensionError("FH decode needs factored score tables");
                if (scales.prior_scale != 0.0 && !prior)
                    throw DimensionError("FH decode with prior_scale needs a prior table");
                break;
            case ModelKind::MRnnT:
                if (!rnnt) throw DimensionError("mRNN-T decode needs transducer scores");
                if (scales.prior_scale != 0.0 && (!ilm || ilm->first_order.rows == 0))
                    throw DimensionError("mRNN-T decode with prior_scale needs a first-order ILM");
                break;
        }
        if (label_count() != inventory->size())
            throw DimensionError("score tables and inventory disagree on the label count");
    }
};

struct BeamConfig {
    double beam = std::numeric_limits<double>::infinity();           // score pruning window, > 0
    std::size_t max_hyps = std::numeric_limits<std::size_t>::max();  // histogram cap, >= 1
    double altas = 0.0;                                              // lookahead scale, 0 = off
    double word_end_beam = std::numeric_limits<double>::infinity();
    bool recombine = true;      // merge hypotheses with equal search state by max
    bool collect_keys = false;  // record surviving hypothesis keys per frame (debug)

    void validate() const {
        if (!(beam > 0.0)) throw Error("beam width must be positive");
        if (max_hyps < 1) throw Error("max_hyps must be at least 1");
        if (altas < 0.0) throw Error("ALTAS scale must be non-negative");
        if (!(word_end_beam > 0.0)) throw Error("word-end beam must be positive");
    }
};

// The acoustic lookahead approximation: the best frame score at time t
// stands in for time t+1, scaled. Scale 0 disables the tightening.
inline double altas_lookahead(double best_frame_score, double scale) {
    if (scale < 0.0) throw Error("ALTAS scale must be non-negative");
    return scale * best_frame_score;
}

struct DecodeStats {
    double avg_active_states = 0.0;  // #S
    double avg_active_trees = 0.0;   // #L
    double search_time_s = 0.0;
    double audio_time_s = 0.0;
    double enc_time_s = 0.0;  // encoders are external; reported for format compatibility
    double rtf = 0.0;
    std::size_t frames_processed = 0;
    std::uint64_t expansions = 0;
    std::vector<std::int32_t> per_frame_states;
    std::vector<std::int32_t> per_frame_trees;
    std::vector<std::vector<std::uint64_t>> per_frame_keys;  // when collect_keys is set
};

struct DecodeResult {
    std::vector<std::string> words;
    double score = 0.0;
    DecodeStats stats;
};

namespace detail {

struct WordLink {
    std::int32_t word_id;
    std::shared_ptr<const WordLink> prev;
};
using WordLinkPtr = std::shared_ptr<const WordLink>;

class LmStateTable {
public:
    explicit LmStateTable(const NGramLm& lm) : lm_(lm) {}

    std::int32_t intern(NGramLm::State s) {
        auto it = ids_.find(s);
        if (it != ids_.end()) return it->second;
        const auto id = static_cast<std::int32_t>(states_.size());
        ids_.emplace(s, id);
        states_.push_back(std::move(s));
        return id;
    }

    const NGramLm::State& get(std::int32_t id) const { return states_[static_cast<std::size_t>(id)]; }
    const NGramLm& lm() const { return lm_; }

private:
    const NGramLm& lm_;
    std::vector<NGramLm::State> states_;
    std::unordered_map<NGramLm::State, std::int32_t, NGramLm::StateHash> ids_;
};

struct Hyp {
    std::int32_t pos = 0;   // 0 = boundary state (silence / leading blank / BOS)
    std::uint8_t sub = 0;   // CTC: 1 = in the blank after pos' label
    LabelId ctx = kNoLabel; // FH left context / mRNN-T previous label
    std::int32_t lm_state = 0;
    double score = 0.0;
    double acoustic = 0.0;  // this frame's emission increment (for ALTAS)
    bool committed = false; // a word ended in this frame (for word-end beam)
    WordLinkPtr words;
};

struct HypKey {
    std::int32_t pos;
    std::uint8_t sub;
    LabelId ctx;
    std::int32_t lm_state;
    bool operator==(const HypKey&) const = default;
};

struct HypKeyHash {
    std::size_t operator()(const HypKey& k) const {
        std::size_t h = static_cast<std::size_t>(k.pos) * 0x9e3779b97f4a7c15ull;
        h ^= (static_cast<std::size_t>(k.sub) + 1) * 0xff51afd7ed558ccdull;
        h ^= (static_cast<std::size_t>(k.ctx + 2)) * 0xc4ceb9fe1a85ec53ull;
        h ^= static_cast<std::size_t>(k.lm_state) * 1099511628211ull;
        return h;
    }
};

}  // namespace detail

// Time-synchronous beam search over the lexical prefix tree. With pruning
// disabled the result attains the exact maximum of the configured decision
// rule over all word sequences and alignments; hypotheses that share
// (tree position, sub-state, context label, LM state) are recombined by max.
inline DecodeResult decode(const DecodeModel& model, const NGramLm& lm, const PrefixTree& tree,
                           const ScaleConfig& scales, const BeamConfig& cfg) {
    scales.validate();
    cfg.validate();
    model.validate(scales);
    const LabelInventory& inv = *model.inventory;
    const TransitionModel no_trans = TransitionModel::none();
    const TransitionModel& trans = model.trans ? *model.trans : no_trans;
    const std::size_t T = model.frames();
    const bool hmm_family =
            model.kind == ModelKind::PhmmZero || model.kind == ModelKind::FactoredHybrid;
    const LabelId special = inv.special_id();  // silence or blank
    const LabelId bos_ctx = special;           // mRNN-T: blank slot doubles as no-context

    using detail::Hyp;
    using detail::HypKey;
    using detail::WordLinkPtr;

    detail::LmStateTable lm_states(lm);
    const std::int32_t lm_init = lm_states.intern(lm.initial_state());

    DecodeStats stats;
    stats.frames_processed = T;
    stats.audio_time_s = static_cast<double>(T) * model.frame_shift_ms() / 1000.0;
    const auto t_start = std::chrono::steady_clock::now();

    // emission increment of one hypothesis step; excludes transition and LM
    auto emission = [&](std::size_t t, LabelId out, LabelId ctx) -> double {
        switch (model.kind) {
            case ModelKind::CtcZero:
            case ModelKind::PhmmZero: {
                const IlmTable* ilm = inv.is_phone(out) ? model.ilm : nullptr;  // specials exempt
                return zero_order_hyp_score(*model.zero, ilm, no_trans, t, out, false, scales);
            }
            case ModelKind::FactoredHybrid: {
                static const PriorTable empty_prior;
                const PriorTable& prior = model.prior ? *model.prior : empty_prior;
                return fh_joint_score(*model.fh, prior, t, ctx, out, scales);
            }
            case ModelKind::MRnnT:
                return mrnnt_hyp_score(*model.rnnt, model.ilm, t, ctx, out, scales);
        }
        return 0.0;
    };

    auto transition = [&](LabelId src, bool loop) -> double {
        return scales.transition_scale *
               (loop ? trans.loop_logprob(src) : trans.forward_logprob(src));
    };

    std::vector<Hyp> frame_hyps;
    std::vector<Hyp> candidates;

    auto push = [&](Hyp h, double em_score) {
        h.acoustic = em_score;
        candidates.push_back(std::move(h));
        ++stats.expansions;
    };

    // candidate construction per model family -----------------------------

    auto seed = [&]() {
        if (hmm_family) {
            // optional silence at utterance start; left context is silence
            Hyp sil;
            sil.pos = 0;
            sil.ctx = special;
            sil.lm_state = lm_init;
            const double em = emission(0, special, special);
            sil.score = em + transition(special, false);
            push(sil, em);
            for (auto c : tree.root().children) {
                const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                Hyp h;
                h.pos = c;
                h.ctx = special;
                h.lm_state = lm_init;
                const double em2 = emission(0, l, special);
                h.score = em2 + transition(l, false);
                push(h, em2);
            }
        } else if (model.kind == ModelKind::CtcZero) {
            Hyp blank;
            blank.pos = 0;
            blank.sub = 1;
            blank.lm_state = lm_init;
            const double em = emission(0, special, kNoLabel);
            blank.score = em;
            push(blank, em);
            for (auto c : tree.root().children) {
                const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                Hyp h;
                h.pos = c;
                h.lm_state = lm_init;
                const double em2 = emission(0, l, kNoLabel);
                h.score = em2;
                push(h, em2);
            }
        } else {  // mRNN-T
            Hyp blank;
            blank.pos = 0;
            blank.ctx = bos_ctx;
            blank.lm_state = lm_init;
            const double em = emission(0, special, bos_ctx);
            blank.score = em;
            push(blank, em);
            for (auto c : tree.root().children) {
                const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                Hyp h;
                h.pos = c;
                h.ctx = l;
                h.lm_state = lm_init;
                const double em2 = emission(0, l, bos_ctx);
                h.score = em2;
                push(h, em2);
            }
        }
    };

    // expands one frame-(t-1) hypothesis into frame-t candidates
    auto expand = [&](const Hyp& h, std::size_t t) {
        if (hmm_family) {
            const LabelId here = h.pos == 0 ? special : tree.nodes[static_cast<std::size_t>(h.pos)].label;
            {  // loop
                Hyp n = h;
                n.committed = false;
                const double em = emission(t, here, h.ctx);
                n.score = h.score + em + transition(here, true);
                push(n, em);
            }
            if (h.pos == 0) {
                // silence -> first phoneme of the next word
                for (auto c : tree.root().children) {
                    const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                    Hyp n = h;
                    n.committed = false;
                    n.pos = c;
                    n.ctx = special;
                    const double em = emission(t, l, special);
                    n.score = h.score + em + transition(special, false);
                    push(n, em);
                }
            } else {
                const auto& node = tree.nodes[static_cast<std::size_t>(h.pos)];
                for (auto c : node.children) {
                    const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                    Hyp n = h;
                    n.committed = false;
                    n.pos = c;
                    n.ctx = here;
                    const double em = emission(t, l, here);
                    n.score = h.score + em + transition(here, false);
                    push(n, em);
                }
                for (auto w : node.word_ids) {
                    auto [lp, next_state] = lm.score_word(lm_states.get(h.lm_state),
                                                          tree.words[static_cast<std::size_t>(w)]);
                    const double lm_add = scales.lm_scale * lp;
                    const auto next_lm = lm_states.intern(next_state);
                    WordLinkPtr words = std::make_shared<detail::WordLink>(detail::WordLink{w, h.words});
                    // word end -> silence
                    {
                        Hyp n = h;
                        n.pos = 0;
                        n.ctx = here;
                        n.lm_state = next_lm;
                        n.words = words;
                        n.committed = true;
                        const double em = emission(t, special, here);
                        n.score = h.score + lm_add + em + transition(here, false);
                        push(n, em);
                    }
                    // word end -> next word's first phoneme
                    for (auto c : tree.root().children) {
                        const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                        Hyp n = h;
                        n.pos = c;
                        n.ctx = here;
                        n.lm_state = next_lm;
                        n.words = words;
                        n.committed = true;
                        const double em = emission(t, l, here);
                        n.score = h.score + lm_add + em + transition(here, false);
                        push(n, em);
                    }
                }
            }
        } else if (model.kind == ModelKind::CtcZero) {
            if (h.pos == 0) {  // leading blank
                Hyp n = h;
                n.committed = false;
                const double em = emission(t, special, kNoLabel);
                n.score = h.score + em;
                push(n, em);
                for (auto c : tree.root().children) {
                    const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                    Hyp m = h;
                    m.committed = false;
                    m.pos = c;
                    m.sub = 0;
                    const double em2 = emission(t, l, kNoLabel);
                    m.score = h.score + em2;
                    push(m, em2);
                }
                return;
            }
            const auto& node = tree.nodes[static_cast<std::size_t>(h.pos)];
            const LabelId here = node.label;
            if (h.sub == 0) {  // sitting on the label
                Hyp loop = h;
                loop.committed = false;
                const double em = emission(t, here, kNoLabel);
                loop.score = h.score + em;
                push(loop, em);
            }
            {  // enter / stay in the blank after this label
                Hyp n = h;
                n.committed = false;
                n.sub = 1;
                const double em = emission(t, special, kNoLabel);
                n.score = h.score + em;
                push(n, em);
            }
            for (auto c : node.children) {
                const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                if (h.sub == 0 && l == here) continue;  // blank mandatory between repeats
                Hyp n = h;
                n.committed = false;
                n.pos = c;
                n.sub = 0;
                const double em = emission(t, l, kNoLabel);
                n.score = h.score + em;
                push(n, em);
            }
            for (auto w : node.word_ids) {
                auto [lp, next_state] = lm.score_word(lm_states.get(h.lm_state),
                                                      tree.words[static_cast<std::size_t>(w)]);
                const double lm_add = scales.lm_scale * lp;
                const auto next_lm = lm_states.intern(next_state);
                WordLinkPtr words = std::make_shared<detail::WordLink>(detail::WordLink{w, h.words});
                for (auto c : tree.root().children) {
                    const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                    if (h.sub == 0 && l == here) continue;  // repeat across the boundary needs blank
                    Hyp n = h;
                    n.pos = c;
                    n.sub = 0;
                    n.lm_state = next_lm;
                    n.words = words;
                    n.committed = true;
                    const double em = emission(t, l, kNoLabel);
                    n.score = h.score + lm_add + em;
                    push(n, em);
                }
            }
        } else {  // mRNN-T: one output decision per frame, no label loops
            const LabelId ctx = h.ctx;
            {  // blank keeps the position and the context
                Hyp n = h;
                n.committed = false;
                const double em = emission(t, special, ctx);
                n.score = h.score + em;
                push(n, em);
            }
            const auto& node = tree.nodes[static_cast<std::size_t>(h.pos)];
            for (auto c : (h.pos == 0 ? tree.root().children : node.children)) {
                const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                Hyp n = h;
                n.committed = false;
                n.pos = c;
                n.ctx = l;
                const double em = emission(t, l, ctx);
                n.score = h.score + em;
                push(n, em);
            }
            if (h.pos != 0) {
                for (auto w : node.word_ids) {
                    auto [lp, next_state] = lm.score_word(lm_states.get(h.lm_state),
                                                          tree.words[static_cast<std::size_t>(w)]);
                    const double lm_add = scales.lm_scale * lp;
                    const auto next_lm = lm_states.intern(next_state);
                    WordLinkPtr words =
                            std::make_shared<detail::WordLink>(detail::WordLink{w, h.words});
                    for (auto c : tree.root().children) {
                        const LabelId l = tree.nodes[static_cast<std::size_t>(c)].label;
                        Hyp n = h;
                        n.pos = c;
                        n.ctx = l;
                        n.lm_state = next_lm;
                        n.words = words;
                        n.committed = true;
                        const double em = emission(t, l, ctx);
                        n.score = h.score + lm_add + em;
                        push(n, em);
                    }
                }
            }
        }
    };

    std::unordered_map<HypKey, std::size_t, detail::HypKeyHash> recomb;

    for (std::size_t t = 0; t < T; ++t) {
        candidates.clear();
        if (t == 0) {
            seed();
        } else {
            for (const auto& h : frame_hyps) expand(h, t);
        }
        if (candidates.empty()) throw OverPrunedError("search died at frame " + std::to_string(t));

        // recombination: keep the max per (pos, sub, ctx, lm_state)
        std::vector<Hyp> merged;
        if (cfg.recombine) {
            recomb.clear();
            merged.reserve(candidates.size());
            for (auto& c : candidates) {
                const HypKey key{c.pos, c.sub, c.ctx, c.lm_state};
                auto [it, fresh] = recomb.try_emplace(key, merged.size());
                if (fresh)
                    merged.push_back(std::move(c));
                else if (c.score > merged[it->second].score)
                    merged[it->second] = std::move(c);
            }
        } else {
            merged = std::move(candidates);
            candidates.clear();
        }

        // score pruning, tightened by the acoustic lookahead approximation
        double best = -std::numeric_limits<double>::infinity();
        double best_acoustic = -std::numeric_limits<double>::infinity();
        double best_committed = -std::numeric_limits<double>::infinity();
        for (const auto& h : merged) {
            best = std::max(best, h.score);
            best_acoustic = std::max(best_acoustic, h.acoustic);
            if (h.committed) best_committed = std::max(best_committed, h.score);
        }
        double beam_eff = cfg.beam;
        if (cfg.altas > 0.0)
            beam_eff += std::min(0.0, altas_lookahead(best_acoustic, cfg.altas));
        const double cutoff = best - beam_eff;
        const double we_cutoff = best_committed - cfg.word_end_beam;

        frame_hyps.clear();
        for (auto& h : merged) {
            if (h.score < cutoff) continue;
            if (h.committed && h.score < we_cutoff) continue;
            frame_hyps.push_back(std::move(h));
        }
        if (frame_hyps.empty()) throw OverPrunedError("pruning emptied the beam at frame " + std::to_string(t));

        // histogram pruning: stable sort by score, insertion order breaks ties
        if (frame_hyps.size() > cfg.max_hyps) {
            std::stable_sort(frame_hyps.begin(), frame_hyps.end(),
                             [](const Hyp& a, const Hyp& b) { return a.score > b.score; });
            frame_hyps.resize(cfg.max_hyps);
        }

        stats.per_frame_states.push_back(static_cast<std::int32_t>(frame_hyps.size()));
        std::vector<std::int32_t> lm_ids;
        lm_ids.reserve(frame_hyps.size());
        for (const auto& h : frame_hyps) lm_ids.push_back(h.lm_state);
        std::sort(lm_ids.begin(), lm_ids.end());
        lm_ids.erase(std::unique(lm_ids.begin(), lm_ids.end()), lm_ids.end());
        stats.per_frame_trees.push_back(static_cast<std::int32_t>(lm_ids.size()));
        if (cfg.collect_keys) {
            std::vector<std::uint64_t> keys;
            keys.reserve(frame_hyps.size());
            for (const auto& h : frame_hyps)
                keys.push_back((static_cast<std::uint64_t>(h.pos) << 40) |
                               (static_cast<std::uint64_t>(h.sub) << 39) |
                               (static_cast<std::uint64_t>(h.ctx + 1) << 28) |
                               static_cast<std::uint64_t>(h.lm_state));
            std::sort(keys.begin(), keys.end());
            stats.per_frame_keys.push_back(std::move(keys));
        }
    }

    // finalize: complete hypotheses only (boundary state with all words
    // committed, or a word-end node whose word ends here)
    bool have_result = false;
    double best_score = -std::numeric_limits<double>::infinity();
    WordLinkPtr best_words;
    auto offer = [&](double score, const WordLinkPtr& words) {
        if (!have_result || score > best_score) {
            have_result = true;
            best_score = score;
            best_words = words;
        }
    };
    for (const auto& h : frame_hyps) {
        if (h.pos == 0) {
            offer(h.score + scales.lm_scale * lm.end_score(lm_states.get(h.lm_state)), h.words);
            continue;
        }
        const auto& node = tree.nodes[static_cast<std::size_t>(h.pos)];
        for (auto w : node.word_ids) {
            auto [lp, next_state] = lm.score_word(lm_states.get(h.lm_state),
                                                  tree.words[static_cast<std::size_t>(w)]);
            const double total = h.score + scales.lm_scale * (lp + lm.end_score(next_state));
            offer(total, std::make_shared<detail::WordLink>(detail::WordLink{w, h.words}));
        }
    }
    if (!have_result)
        throw OverPrunedError("no complete hypothesis at the final frame (over-pruned or too few frames)");

    const auto t_end = std::chrono::steady_clock::now();
    stats.search_time_s = std::chrono::duration<double>(t_end - t_start).count();
    stats.rtf = stats.audio_time_s > 0.0 ? stats.search_time_s / stats.audio_time_s : 0.0;
    double s_sum = 0.0, l_sum = 0.0;
    for (auto v : stats.per_frame_states) s_sum += v;
    for (auto v : stats.per_frame_trees) l_sum += v;
    stats.avg_active_states = s_sum / static_cast<double>(T);
    stats.avg_active_trees = l_sum / static_cast<double>(T);

    DecodeResult result;
    result.score = best_score;
    result.stats = std::move(stats);
    std::vector<std::int32_t> rev;
    for (const detail::WordLink* w = best_words.get(); w; w = w->prev.get())
        rev.push_back(w->word_id);
    for (auto it = rev.rbegin(); it != rev.rend(); ++it)
        result.words.push_back(tree.words[static_cast<std::size_t>(*it)]);
    return result;
}

// Aggregates per-utterance stats into corpus totals; rtf is total search
// time over total audio time.
inline DecodeStats measure_rtf(std::span<const DecodeStats> runs) {
    if (runs.empty()) throw Error("measure_rtf needs at least one run");
    DecodeStats agg;
    double s_frames = 0.0, l_frames = 0.0;
    for (const auto& r : runs) {
        agg.search_time_s += r.search_time_s;
        agg.audio_time_s += r.audio_time_s;
        agg.enc_time_s += r.enc_time_s;
        agg.frames_processed += r.frames_processed;
        agg.expansions += r.expansions;
        s_frames += r.avg_active_states * static_cast<double>(r.frames_processed);
        l_frames += r.avg_active_trees * static_cast<double>(r.frames_processed);
    }
    if (!(agg.audio_time_s > 0.0)) throw Error("measure_rtf: zero audio duration");
    agg.rtf = agg.search_time_s / agg.audio_time_s;
    if (agg.frames_processed > 0) {
        agg.avg_active_states = s_frames / static_cast<double>(agg.frames_processed);
        agg.avg_active_trees = l_frames / static_cast<double>(agg.frames_processed);
    }
    return agg;
}

}  // namespace topokit

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "topokit/align_eval.hpp"
#include "topokit/decoder.hpp"
#include "topokit/dp.hpp"
#include "topokit/emission.hpp"
#include "topokit/errors.hpp"
#include "topokit/fsa.hpp"
#include "topokit/lexicon.hpp"
#include "topokit/models.hpp"
#include "topokit/numeric.hpp"

namespace topokit {

// --- synthetic data -------------------------------------------------------

// Per-symbol Gaussian cluster centers shared by all corpora drawn from the
// same world, so a model trained on one corpus transfers to held-out data.
struct FeatureWorld {
    int dim = 8;
    double noise_sigma = 0.0;
    std::vector<std::string> symbols;  // sorted symbols plus the silence marker
    MatrixD means;                     // symbols.size() x dim

    int symbol_index(const std::string& s) const {
        auto it = std::lower_bound(symbols.begin(), symbols.end() - 1, s);
        if (it == symbols.end() - 1 || *it != s) throw Error("unknown symbol: " + s);
        return static_cast<int>(it - symbols.begin());
    }
    int silence_index() const { return static_cast<int>(symbols.size()) - 1; }
};

inline FeatureWorld make_feature_world(const Lexicon& lex, int dim, double noise_sigma,
                                       std::uint64_t seed, double spread = 3.0) {
    FeatureWorld w;
    w.dim = dim;
    w.noise_sigma = noise_sigma;
    for (const auto& [word, pron] : lex.entries())
        for (const auto& p : pron) w.symbols.push_back(p.symbol);
    std::sort(w.symbols.begin(), w.symbols.end());
    w.symbols.erase(std::unique(w.symbols.begin(), w.symbols.end()), w.symbols.end());
    w.symbols.push_back(LabelInventory::kSilenceSymbol);  // silence rides last
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    w.means = MatrixD(w.symbols.size(), static_cast<std::size_t>(dim));
    for (auto& x : w.means.v) x = spread * n(rng);
    return w;
}

struct DurationModel {
    int min_phoneme_frames = 3;
    int max_phoneme_frames = 8;
    double silence_prob = 0.7;  // chance of a silence segment at each word boundary slot
    int min_silence_frames = 2;
    int max_silence_frames = 6;
    int min_words = 1;
    int max_words = 3;

    void validate() const {
        if (min_phoneme_frames < 1 || max_phoneme_frames < min_phoneme_frames)
            throw Error("invalid phoneme duration range");
        if (min_silence_frames < 1 || max_silence_frames < min_silence_frames)
            throw Error("invalid silence duration range");
        if (silence_prob < 0.0 || silence_prob > 1.0) throw Error("invalid silence probability");
        if (min_words < 1 || max_words < min_words) throw Error("invalid word count range");
    }
};

struct Utterance {
    std::string id;
    MatrixD features;  // T x dim
    std::vector<std::string> words;
    std::vector<LabelId> truth_labels;  // per-frame truth in the silence inventory
    WordBoundaries truth_bounds;
};

struct SyntheticCorpus {
    std::vector<Utterance> utts;
    Lexicon lexicon;
    LabelInventory truth_inventory;  // P-HMM style: phones plus silence
    FeatureWorld world;
    float frame_shift_ms = 40.0f;
    std::uint64_t seed = 0;
    std::size_t silence_frames = 0;
    std::size_t total_frames = 0;

    double realized_silence_fraction() const {
        return total_frames ? static_cast<double>(silence_frames) / static_cast<double>(total_frames)
                            : 0.0;
    }
};

inline SyntheticCorpus generate_corpus(std::uint64_t seed, std::size_t n_utts, const Lexicon& lex,
                                       const FeatureWorld& world, const DurationModel& dm,
                                       float frame_shift_ms = 40.0f) {
    dm.validate();
    if (lex.empty()) throw Error("corpus generation needs a non-empty lexicon");
    SyntheticCorpus corpus;
    corpus.lexicon = lex;
    corpus.truth_inventory = build_inventory(lex, TopologyKind::Phmm);
    corpus.world = world;
    corpus.frame_shift_ms = frame_shift_ms;
    corpus.seed = seed;

    std::vector<std::string> vocab;
    for (const auto& [w, p] : lex.entries()) vocab.push_back(w);

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> n_words_d(dm.min_words, dm.max_words);
    std::uniform_int_distribution<int> phone_dur(dm.min_phoneme_frames, dm.max_phoneme_frames);
    std::uniform_int_distribution<int> sil_dur(dm.min_silence_frames, dm.max_silence_frames);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const LabelId sil_id = *corpus.truth_inventory.silence_id();

    for (std::size_t u = 0; u < n_utts; ++u) {
        Utterance utt;
        utt.id = "utt" + std::to_string(u);
        const int n_words = n_words_d(rng);
        for (int i = 0; i < n_words; ++i)
            utt.words.push_back(vocab[rng() % vocab.size()]);

        struct Seg {
            LabelId label;
            int sym;
            int frames;
            bool is_sil;
        };
        std::vector<Seg> segs;
        auto maybe_silence = [&]() {
            if (coin(rng) < dm.silence_prob)
                segs.push_back({sil_id, world.silence_index(), sil_dur(rng), true});
        };
        std::vector<std::pair<std::size_t, std::size_t>> word_frames;  // filled below
        maybe_silence();
        std::vector<std::pair<std::size_t, std::size_t>> word_seg_range;
        for (int i = 0; i < n_words; ++i) {
            const std::size_t seg_begin = segs.size();
            for (const auto& p : lex.pronunciation(utt.words[static_cast<std::size_t>(i)]))
                segs.push_back({corpus.truth_inventory.id_of(p), world.symbol_index(p.symbol),
                                phone_dur(rng), false});
            word_seg_range.emplace_back(seg_begin, segs.size());
            if (i + 1 < n_words) maybe_silence();
        }
        maybe_silence();

        std::size_t T = 0;
        for (const auto& s : segs) T += static_cast<std::size_t>(s.frames);
        utt.features = MatrixD(T, static_cast<std::size_t>(world.dim));
        utt.truth_labels.resize(T);
        std::vector<std::size_t> seg_start(segs.size());
        std::size_t t = 0;
        for (std::size_t s = 0; s < segs.size(); ++s) {
            seg_start[s] = t;
            for (int f = 0; f < segs[s].frames; ++f, ++t) {
                utt.truth_labels[t] = segs[s].label;
                for (int d = 0; d < world.dim; ++d)
                    utt.features.at(t, static_cast<std::size_t>(d)) =
                            world.means.at(static_cast<std::size_t>(segs[s].sym),
                                           static_cast<std::size_t>(d)) +
                            world.noise_sigma * noise(rng);
                if (segs[s].is_sil) ++corpus.silence_frames;
            }
        }
        corpus.total_frames += T;

        for (int i = 0; i < n_words; ++i) {
            const auto [b, e] = word_seg_range[static_cast<std::size_t>(i)];
            const std::size_t first = seg_start[b];
            const std::size_t last = seg_start[e - 1] + static_cast<std::size_t>(segs[e - 1].frames) - 1;
            utt.truth_bounds.items.push_back({utt.words[static_cast<std::size_t>(i)],
                                              double(first) * frame_shift_ms,
                                              double(last) * frame_shift_ms});
        }
        corpus.utts.push_back(std::move(utt));
    }
    return corpus;
}

// Expected silence share of the frame budget under the duration model, for
// sanity checks against the realized fraction.
inline double expected_silence_fraction(const Lexicon& lex, const DurationModel& dm) {
    double mean_pron = 0.0;
    for (const auto& [w, p] : lex.entries()) mean_pron += static_cast<double>(p.size());
    mean_pron /= static_cast<double>(lex.size());
    const double mean_words = 0.5 * (dm.min_words + dm.max_words);
    const double mean_phone_dur = 0.5 * (dm.min_phoneme_frames + dm.max_phoneme_frames);
    const double mean_sil_dur = 0.5 * (dm.min_silence_frames + dm.max_silence_frames);
    const double sil = (mean_words + 1.0) * dm.silence_prob * mean_sil_dur;
    const double phones = mean_words * mean_pron * mean_phone_dur;
    return sil / (sil + phones);
}

// --- frame classifier ------------------------------------------------------

// One hidden layer, tanh, linear readout. Stands in for the neural encoders,
// which are out of scope here.
class FrameClassifier {
public:
    FrameClassifier() = default;

    FrameClassifier(int in_dim, int hidden, int out_dim, std::uint64_t seed)
            : w1_(static_cast<std::size_t>(in_dim), static_cast<std::size_t>(hidden)),
              b1_(static_cast<std::size_t>(hidden), 0.0),
              w2_(static_cast<std::size_t>(hidden), static_cast<std::size_t>(out_dim)),
              b2_(static_cast<std::size_t>(out_dim), 0.0) {
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> u(-0.5, 0.5);
        const double s1 = 1.0 / std::sqrt(static_cast<double>(in_dim));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (auto& x : w1_.v) x = u(rng) * s1;
        for (auto& x : w2_.v) x = u(rng) * s2;
    }

    int in_dim() const { return static_cast<int>(w1_.rows); }
    int hidden_dim() const { return static_cast<int>(w1_.cols); }
    int out_dim() const { return static_cast<int>(w2_.cols); }

    struct Forward {
        MatrixD hidden;  // T x H, post-tanh
        MatrixD logits;  // T x L
    };

    Forward forward(const MatrixD& x) const {
        if (x.cols != w1_.rows) throw DimensionError("classifier input dimension mismatch");
        Forward f;
        f.hidden = MatrixD(x.rows, w1_.cols);
        f.logits = MatrixD(x.rows, w2_.cols);
        for (std::size_t t = 0; t < x.rows; ++t) {
            for (std::size_t h = 0; h < w1_.cols; ++h) {
                double acc = b1_[h];
                for (std::size_t d = 0; d < w1_.rows; ++d) acc += x.at(t, d) * w1_.at(d, h);
                f.hidden.at(t, h) = std::tanh(acc);
            }
            for (std::size_t l = 0; l < w2_.cols; ++l) {
                double acc = b2_[l];
                for (std::size_t h = 0; h < w2_.rows; ++h) acc += f.hidden.at(t, h) * w2_.at(h, l);
                f.logits.at(t, l) = acc;
            }
        }
        return f;
    }

    MatrixD logits(const MatrixD& x) const { return forward(x).logits; }

    struct Grads {
        MatrixD w1, w2;
        std::vector<double> b1, b2;
        std::size_t count = 0;

        void init(const FrameClassifier& m) {
            w1 = MatrixD(m.w1_.rows, m.w1_.cols, 0.0);
            w2 = MatrixD(m.w2_.rows, m.w2_.cols, 0.0);
            b1.assign(m.b1_.size(), 0.0);
            b2.assign(m.b2_.size(), 0.0);
            count = 0;
        }
    };

    // accumulates parameter gradients for d loss / d logits = g
    void backward(const MatrixD& x, const Forward& f, const MatrixD& g, Grads& grads) const {
        for (std::size_t t = 0; t < x.rows; ++t) {
            for (std::size_t l = 0; l < w2_.cols; ++l) {
                const double gl = g.at(t, l);
                if (gl == 0.0) continue;
                grads.b2[l] += gl;
                for (std::size_t h = 0; h < w2_.rows; ++h)
                    grads.w2.at(h, l) += f.hidden.at(t, h) * gl;
            }
            for (std::size_t h = 0; h < w2_.rows; ++h) {
                double dz = 0.0;
                for (std::size_t l = 0; l < w2_.cols; ++l) dz += g.at(t, l) * w2_.at(h, l);
                const double z = f.hidden.at(t, h);
                const double dpre = dz * (1.0 - z * z);
                grads.b1[h] += dpre;
                for (std::size_t d = 0; d < w1_.rows; ++d) grads.w1.at(d, h) += x.at(t, d) * dpre;
            }
        }
        ++grads.count;
    }

    void apply(const Grads& g, double lr) {
        if (g.count == 0) return;
        const double s = lr / static_cast<double>(g.count);
        for (std::size_t i = 0; i < w1_.v.size(); ++i) w1_.v[i] -= s * g.w1.v[i];
        for (std::size_t i = 0; i < w2_.v.size(); ++i) w2_.v[i] -= s * g.w2.v[i];
        for (std::size_t i = 0; i < b1_.size(); ++i) b1_[i] -= s * g.b1[i];
        for (std::size_t i = 0; i < b2_.size(); ++i) b2_[i] -= s * g.b2[i];
    }

    bool operator==(const FrameClassifier& o) const {
        return w1_.v == o.w1_.v && w2_.v == o.w2_.v && b1_ == o.b1_ && b2_ == o.b2_;
    }

    void save(std::ostream& out) const {
        out << "MLP1 " << w1_.rows << ' ' << w1_.cols << ' ' << w2_.cols << '\n';
        out.precision(17);
        for (double x : w1_.v) out << x << '\n';
        for (double x : b1_) out << x << '\n';
        for (double x : w2_.v) out << x << '\n';
        for (double x : b2_) out << x << '\n';
    }

    static FrameClassifier load(std::istream& in) {
        std::string magic;
        std::size_t in_dim, hidden, out_dim;
        if (!(in >> magic) || magic != "MLP1" || !(in >> in_dim >> hidden >> out_dim))
            throw ParseError("bad classifier header");
        FrameClassifier m;
        m.w1_ = MatrixD(in_dim, hidden);
        m.b1_.resize(hidden);
        m.w2_ = MatrixD(hidden, out_dim);
        m.b2_.resize(out_dim);
        for (auto& x : m.w1_.v)
            if (!(in >> x)) throw ParseError("classifier truncated");
        for (auto& x : m.b1_)
            if (!(in >> x)) throw ParseError("classifier truncated");
        for (auto& x : m.w2_.v)
            if (!(in >> x)) throw ParseError("classifier truncated");
        for (auto& x : m.b2_)
            if (!(in >> x)) throw ParseError("classifier truncated");
        return m;
    }

private:
    MatrixD w1_;
    std::vector<double> b1_;
    MatrixD w2_;
    std::vector<double> b2_;
};

// --- training --------------------------------------------------------------

struct TrainConfig {
    int epochs = 40;
    double learning_rate = 0.5;
    std::uint64_t seed = 1;
    ScaleConfig scales;  // label/transition scales of the expectation step
    int batch_size = 10;
    int hidden = 16;
    bool allow_silence = true;  // silence slots in the P-HMM training FSA
    // P-HMM loop probabilities; 0.5/0.5 is the constant simple variant. A
    // lower silence loop keeps the expectation step from parking mass in
    // stretched silence.
    double phone_loop_prob = 0.5;
    double silence_loop_prob = 0.5;

    void validate() const {
        if (epochs < 1) throw Error("epochs must be at least 1");
        if (!(learning_rate > 0.0)) throw Error("learning rate must be positive");
        if (batch_size < 1) throw Error("batch size must be at least 1");
    }
};

inline TransitionModel phmm_transitions(const LabelInventory& inv, double phone_loop,
                                        double silence_loop) {
    if (phone_loop == silence_loop) return TransitionModel::global(phone_loop);
    std::vector<double> loops(inv.size(), phone_loop);
    loops[static_cast<std::size_t>(*inv.silence_id())] = silence_loop;
    return TransitionModel::per_label(loops);
}

inline void write_train_config(std::ostream& out, const TrainConfig& c, TopologyKind topology) {
    out << "topology=" << topology_name(topology) << '\n';
    out << "epochs=" << c.epochs << '\n';
    out << "learning_rate=" << c.learning_rate << '\n';
    out << "seed=" << c.seed << '\n';
    out << "alpha=" << c.scales.label_scale << '\n';
    out << "beta=" << c.scales.transition_scale << '\n';
    out << "batch_size=" << c.batch_size << '\n';
    out << "hidden=" << c.hidden << '\n';
    out << "allow_silence=" << (c.allow_silence ? 1 : 0) << '\n';
}

struct ZeroOrderModel {
    FrameClassifier net;
    LabelInventory inventory;
    TopologyKind topology = TopologyKind::Phmm;
    TransitionModel transitions;
    std::vector<double> epoch_losses;  // mean per-utterance full-sum loss
    std::size_t skipped_utts = 0;
};

// From-scratch full-sum training of the zero-order alignment model.
inline ZeroOrderModel train_zero_order(const SyntheticCorpus& corpus, TopologyKind topology,
                                       const TrainConfig& cfg) {
    cfg.validate();
    if (corpus.utts.empty()) throw Error("training needs a non-empty corpus");
    ZeroOrderModel model;
    model.topology = topology;
    model.inventory = build_inventory(corpus.lexicon, topology);
    model.transitions = topology == TopologyKind::Phmm
                                ? phmm_transitions(model.inventory, cfg.phone_loop_prob,
                                                   cfg.silence_loop_prob)
                                : TransitionModel::none();
    model.net = FrameClassifier(corpus.world.dim, cfg.hidden,
                                static_cast<int>(model.inventory.size()), cfg.seed);

    // per-utterance FSAs are fixed; build them once
    std::vector<AlignmentFsa> fsas;
    std::vector<const Utterance*> usable;
    for (const auto& utt : corpus.utts) {
        auto phones = phonemize(utt.words, corpus.lexicon);
        AlignmentFsa fsa = topology == TopologyKind::Ctc
                                   ? build_alignment_fsa_ctc(phones, model.inventory)
                                   : build_alignment_fsa_phmm(phones, model.inventory,
                                                              cfg.allow_silence);
        if (utt.features.rows < static_cast<std::size_t>(fsa.min_path_length())) {
            ++model.skipped_utts;
            continue;
        }
        fsas.push_back(std::move(fsa));
        usable.push_back(&utt);
    }
    if (usable.empty()) throw Error("no utterance is long enough for its alignment FSA");

    std::vector<std::size_t> order(usable.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);

    FrameClassifier::Grads grads;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        std::size_t i = 0;
        while (i < order.size()) {
            grads.init(model.net);
            const std::size_t end = std::min(order.size(), i + static_cast<std::size_t>(cfg.batch_size));
            for (; i < end; ++i) {
                const std::size_t u = order[i];
                auto f = model.net.forward(usable[u]->features);
                auto g = full_sum_gradient(fsas[u], f.logits, model.transitions, cfg.scales);
                // normalize per frame so the step size is length invariant
                const double inv_t = 1.0 / static_cast<double>(f.logits.rows);
                for (auto& v : g.grad.v) v *= inv_t;
                loss_sum += g.loss * inv_t;
                model.net.backward(usable[u]->features, f, g.grad, grads);
            }
            model.net.apply(grads, cfg.learning_rate);
        }
        model.epoch_losses.push_back(loss_sum / static_cast<double>(usable.size()));
    }
    return model;
}

// Viterbi forced alignment of a corpus under a trained zero-order model.
// CTC alignments can additionally be loop-removed for mRNN-T target prep.
inline std::vector<FrameAlignment> force_align(const SyntheticCorpus& corpus,
                                               const ZeroOrderModel& model,
                                               const ScaleConfig& scales,
                                               bool ctc_remove_loops = false,
                                               bool allow_silence = true) {
    std::vector<FrameAlignment> out;
    for (const auto& utt : corpus.utts) {
        auto phones = phonemize(utt.words, corpus.lexicon);
        AlignmentFsa fsa = model.topology == TopologyKind::Ctc
                                   ? build_alignment_fsa_ctc(phones, model.inventory)
                                   : build_alignment_fsa_phmm(phones, model.inventory, allow_silence);
        MatrixD lp = log_softmax_copy(model.net.logits(utt.features));
        auto vit = viterbi(fsa, lp, model.transitions, scales);
        if (ctc_remove_loops && model.topology == TopologyKind::Ctc)
            vit.path = remove_label_loops(fsa, vit.path, model.inventory);
        FrameAlignment a;
        a.utt_id = utt.id;
        a.labels = std::move(vit.path.labels);
        a.frame_shift_ms = corpus.frame_shift_ms;
        a.words = utt.words;
        out.push_back(std::move(a));
    }
    return out;
}

// --- first-order models ------------------------------------------------

// Derives (left context, center) or (context, output) frame targets from an
// alignment, with the segment convention: the left context of a segment is
// the label of the previous segment, the special label at utterance start.
inline std::vector<LabelId> segment_left_contexts(std::span<const LabelId> labels, LabelId special) {
    std::vector<LabelId> left(labels.size(), special);
    for (std::size_t t = 1; t < labels.size(); ++t)
        left[t] = labels[t] != labels[t - 1] ? labels[t - 1] : left[t - 1];
    return left;
}

// mRNN-T contexts: the last non-blank label before t; the blank slot stands
// for "no context yet".
inline std::vector<LabelId> transducer_contexts(std::span<const LabelId> labels, LabelId blank) {
    std::vector<LabelId> ctx(labels.size(), blank);
    for (std::size_t t = 1; t < labels.size(); ++t)
        ctx[t] = labels[t - 1] != blank ? labels[t - 1] : ctx[t - 1];
    return ctx;
}

struct FirstOrderModel {
    ModelKind kind = ModelKind::FactoredHybrid;
    LabelInventory inventory;
    FrameClassifier center;  // FH: [x; onehot(left)] -> center. mRNN-T: [x; onehot(ctx)] -> output
    FrameClassifier left;    // FH only: x -> left posterior
    std::vector<double> epoch_ce;
    float frame_shift_ms = 40.0f;

    FirstOrderFHScores fh_scores(const MatrixD& features) const {
        const std::size_t L = inventory.size();
        const std::size_t T = features.rows;
        FirstOrderFHScores s;
        s.T = static_cast<std::uint32_t>(T);
        s.L = static_cast<std::uint32_t>(L);
        s.frame_shift_ms = frame_shift_ms;
        s.center_given_left.resize(T * L * L);
        s.left_posterior.resize(T * L);
        MatrixD lp = log_softmax_copy(left.logits(features));
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t l = 0; l < L; ++l) s.left_posterior[t * L + l] = lp.at(t, l);
        MatrixD augmented(T, features.cols + L, 0.0);
        for (std::size_t ctx = 0; ctx < L; ++ctx) {
            for (std::size_t t = 0; t < T; ++t) {
                for (std::size_t d = 0; d < features.cols; ++d)
                    augmented.at(t, d) = features.at(t, d);
                for (std::size_t l = 0; l < L; ++l)
                    augmented.at(t, features.cols + l) = l == ctx ? 1.0 : 0.0;
            }
            MatrixD cond = log_softmax_copy(center.logits(augmented));
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t c = 0; c < L; ++c)
                    s.center_given_left[(t * L + ctx) * L + c] = cond.at(t, c);
        }
        return s;
    }

    MRnnTScores mrnnt_scores(const MatrixD& features) const {
        const std::size_t L = inventory.size();
        const std::size_t T = features.rows;
        MRnnTScores s;
        s.T = static_cast<std::uint32_t>(T);
        s.L = static_cast<std::uint32_t>(L);
        s.frame_shift_ms = frame_shift_ms;
        s.label_given_context.resize(T * L * L);
        MatrixD augmented(T, features.cols + L, 0.0);
        for (std::size_t ctx = 0; ctx < L; ++ctx) {
            for (std::size_t t = 0; t < T; ++t) {
                for (std::size_t d = 0; d < features.cols; ++d)
                    augmented.at(t, d) = features.at(t, d);
                for (std::size_t l = 0; l < L; ++l)
                    augmented.at(t, features.cols + l) = l == ctx ? 1.0 : 0.0;
            }
            MatrixD cond = log_softmax_copy(center.logits(augmented));
            for (std::size_t t = 0; t < T; ++t)
                for (std::size_t o = 0; o < L; ++o)
                    s.label_given_context[(t * L + ctx) * L + o] = cond.at(t, o);
        }
        return s;
    }
};

// Frame-wise cross-entropy training of the first-order heads on fixed
// alignments. FH expects P-HMM alignments; mRNN-T expects loop-removed CTC
// alignments over the blank inventory.
inline FirstOrderModel train_first_order(const SyntheticCorpus& corpus,
                                         const std::vector<FrameAlignment>& alignments,
                                         const LabelInventory& inventory, ModelKind kind,
                                         const TrainConfig& cfg) {
    cfg.validate();
    if (kind != ModelKind::FactoredHybrid && kind != ModelKind::MRnnT)
        throw Error("train_first_order builds FH or mRNN-T models");
    if (alignments.size() != corpus.utts.size())
        throw DimensionError("alignment count does not match the corpus");
    const std::size_t L = inventory.size();
    const LabelId special = inventory.special_id();

    FirstOrderModel model;
    model.kind = kind;
    model.inventory = inventory;
    model.frame_shift_ms = corpus.frame_shift_ms;
    model.center = FrameClassifier(corpus.world.dim + static_cast<int>(L), cfg.hidden,
                                   static_cast<int>(L), cfg.seed + 1);
    if (kind == ModelKind::FactoredHybrid)
        model.left = FrameClassifier(corpus.world.dim, cfg.hidden, static_cast<int>(L), cfg.seed + 2);

    // precompute augmented inputs and targets
    struct Sample {
        MatrixD augmented;           // [x; onehot(context)]
        std::vector<LabelId> target; // center / output labels
        const MatrixD* features;
        std::vector<LabelId> left_target;
    };
    std::vector<Sample> samples;
    for (std::size_t u = 0; u < corpus.utts.size(); ++u) {
        const auto& al = alignments[u];
        const auto& x = corpus.utts[u].features;
        if (al.labels.size() != x.rows) throw DimensionError("alignment length mismatch for " + al.utt_id);
        for (LabelId l : al.labels)
            if (l < 0 || static_cast<std::size_t>(l) >= L)
                throw DimensionError("context label out of range in " + al.utt_id);
        Sample s;
        s.features = &x;
        s.target.assign(al.labels.begin(), al.labels.end());
        const auto ctx = kind == ModelKind::FactoredHybrid
                                 ? segment_left_contexts(al.labels, special)
                                 : transducer_contexts(al.labels, special);
        s.augmented = MatrixD(x.rows, x.cols + L, 0.0);
        for (std::size_t t = 0; t < x.rows; ++t) {
            for (std::size_t d = 0; d < x.cols; ++d) s.augmented.at(t, d) = x.at(t, d);
            s.augmented.at(t, x.cols + static_cast<std::size_t>(ctx[t])) = 1.0;
        }
        if (kind == ModelKind::FactoredHybrid) s.left_target = ctx;
        samples.push_back(std::move(s));
    }

    auto ce_grad = [&](const MatrixD& logits, std::span<const LabelId> target) {
        MatrixD g = log_softmax_copy(logits);
        for (auto& v : g.v) v = std::exp(v);
        const double inv_T = 1.0 / static_cast<double>(logits.rows);
        for (std::size_t t = 0; t < logits.rows; ++t) {
            g.at(t, static_cast<std::size_t>(target[t])) -= 1.0;
            for (std::size_t l = 0; l < logits.cols; ++l) g.at(t, l) *= inv_T;
        }
        return g;
    };

    FrameClassifier::Grads cg, lg;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double ce_sum = 0.0;
        std::size_t i = 0;
        while (i < samples.size()) {
            cg.init(model.center);
            if (kind == ModelKind::FactoredHybrid) lg.init(model.left);
            const std::size_t end = std::min(samples.size(), i + static_cast<std::size_t>(cfg.batch_size));
            for (; i < end; ++i) {
                auto f = model.center.forward(samples[i].augmented);
                ce_sum += frame_ce_loss(std::span<const LabelId>(samples[i].target), f.logits);
                model.center.backward(samples[i].augmented, f,
                                      ce_grad(f.logits, samples[i].target), cg);
                if (kind == ModelKind::FactoredHybrid) {
                    auto fl = model.left.forward(*samples[i].features);
                    model.left.backward(*samples[i].features, fl,
                                        ce_grad(fl.logits, samples[i].left_target), lg);
                }
            }
            model.center.apply(cg, cfg.learning_rate);
            if (kind == ModelKind::FactoredHybrid) model.left.apply(lg, cfg.learning_rate);
        }
        model.epoch_ce.push_back(ce_sum / static_cast<double>(samples.size()));
    }
    return model;
}

}  // namespace topokit

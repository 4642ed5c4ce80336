#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "topokit/errors.hpp"
#include "topokit/numeric.hpp"

namespace topokit {

// Frame-level log-score matrix, T x L row-major. Scores are stored in single
// precision (the on-disk unit); all DP arithmetic promotes to double.
struct EmissionMatrix {
    std::uint32_t T = 0;
    std::uint32_t L = 0;
    float frame_shift_ms = 10.0f;
    bool normalized = false;
    std::vector<float> scores;  // T * L

    EmissionMatrix() = default;
    EmissionMatrix(std::uint32_t t, std::uint32_t l, float shift_ms, bool norm)
            : T(t), L(l), frame_shift_ms(shift_ms), normalized(norm), scores(std::size_t(t) * l, 0.0f) {}

    double at(std::size_t t, std::size_t l) const { return scores[t * L + l]; }
    float& at(std::size_t t, std::size_t l) { return scores[t * L + l]; }

    void validate() const {
        if (T < 1 || L < 1) throw DimensionError("emission matrix must be at least 1x1");
        if (scores.size() != std::size_t(T) * L) throw DimensionError("emission matrix storage size mismatch");
        for (float s : scores)
            if (!std::isfinite(s)) throw Error("emission matrix contains a non-finite score");
        if (normalized) {
            for (std::size_t t = 0; t < T; ++t) {
                double hi = -std::numeric_limits<double>::infinity();
                for (std::size_t l = 0; l < L; ++l) hi = std::max(hi, at(t, l));
                double acc = 0.0;
                for (std::size_t l = 0; l < L; ++l) acc += std::exp(at(t, l) - hi);
                if (std::abs(hi + std::log(acc)) > 1e-5)
                    throw Error("emission matrix row " + std::to_string(t) + " not normalized");
            }
        }
    }
};

inline EmissionMatrix emission_from_logits(const MatrixD& logits, float frame_shift_ms) {
    MatrixD lp = log_softmax_copy(logits);
    EmissionMatrix em(static_cast<std::uint32_t>(lp.rows), static_cast<std::uint32_t>(lp.cols),
                      frame_shift_ms, true);
    for (std::size_t i = 0; i < lp.v.size(); ++i) em.scores[i] = static_cast<float>(lp.v[i]);
    return em;
}

// --- text format ------------------------------------------------------
// header line: "T L frame_shift_ms normalized", then T rows of L floats.
// Floats are printed with max_digits10 so text round-trips are bit exact.

inline void write_emission_text(std::ostream& out, const EmissionMatrix& em) {
    out << em.T << ' ' << em.L << ' ';
    out.precision(std::numeric_limits<float>::max_digits10);
    out << em.frame_shift_ms << ' ' << (em.normalized ? 1 : 0) << '\n';
    for (std::size_t t = 0; t < em.T; ++t) {
        for (std::size_t l = 0; l < em.L; ++l) {
            if (l) out << ' ';
            out << em.scores[t * em.L + l];
        }
        out << '\n';
    }
}

inline EmissionMatrix read_emission_text(std::istream& in) {
    EmissionMatrix em;
    int norm = 0;
    if (!(in >> em.T >> em.L >> em.frame_shift_ms >> norm))
        throw ParseError("bad emission matrix header");
    if (em.T < 1 || em.L < 1) throw ParseError("emission matrix must be at least 1x1");
    em.normalized = norm != 0;
    em.scores.resize(std::size_t(em.T) * em.L);
    for (auto& s : em.scores)
        if (!(in >> s)) throw ParseError("emission matrix truncated");
    return em;
}

// --- binary format ----------------------------------------------------
// magic "EMAT1", little-endian u32 T, u32 L, f32 frame_shift, u8 normalized,
// then T*L little-endian f32, row major.

namespace detail {
template <class T>
void write_le(std::ostream& out, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    out.write(buf, sizeof(T));  // host is little-endian
}

template <class T>
T read_le(std::istream& in) {
    char buf[sizeof(T)];
    in.read(buf, sizeof(T));
    if (!in) throw ParseError("binary emission matrix truncated");
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}
}  // namespace detail

inline void write_emission_binary(std::ostream& out, const EmissionMatrix& em) {
    out.write("EMAT1", 5);
    detail::write_le<std::uint32_t>(out, em.T);
    detail::write_le<std::uint32_t>(out, em.L);
    detail::write_le<float>(out, em.frame_shift_ms);
    detail::write_le<std::uint8_t>(out, em.normalized ? 1 : 0);
    for (float s : em.scores) detail::write_le<float>(out, s);
}

inline EmissionMatrix read_emission_binary(std::istream& in) {
    char magic[5];
    in.read(magic, 5);
    if (!in || std::memcmp(magic, "EMAT1", 5) != 0) throw ParseError("bad emission matrix magic");
    EmissionMatrix em;
    em.T = detail::read_le<std::uint32_t>(in);
    em.L = detail::read_le<std::uint32_t>(in);
    em.frame_shift_ms = detail::read_le<float>(in);
    em.normalized = detail::read_le<std::uint8_t>(in) != 0;
    if (em.T < 1 || em.L < 1) throw ParseError("emission matrix must be at least 1x1");
    em.scores.resize(std::size_t(em.T) * em.L);
    for (auto& s : em.scores) s = detail::read_le<float>(in);
    return em;
}

// Loads either variant, sniffing the magic bytes.
inline EmissionMatrix read_emission_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open emission file: " + path);
    char magic[5] = {0};
    in.read(magic, 5);
    in.seekg(0);
    if (std::memcmp(magic, "EMAT1", 5) == 0) return read_emission_binary(in);
    return read_emission_text(in);
}

inline void write_emission_file(const std::string& path, const EmissionMatrix& em, bool binary) {
    std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw Error("cannot write emission file: " + path);
    if (binary)
        write_emission_binary(out, em);
    else
        write_emission_text(out, em);
}

}  // namespace topokit

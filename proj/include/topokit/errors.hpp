#pragma once

#include <stdexcept>
#include <string>

namespace topokit {

// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input file / stream. Carries a line number when known.
class ParseError : public Error {
public:
    explicit ParseError(const std::string& msg) : Error(msg), line(0) {}
    ParseError(const std::string& msg, int line_no)
            : Error(msg + " (line " + std::to_string(line_no) + ")"), line(line_no) {}
    int line;
};

// A requested word is not in the lexicon.
class OovError : public Error {
public:
    explicit OovError(const std::string& word)
            : Error("out-of-vocabulary word: " + word), word(word) {}
    std::string word;
};

// The alignment FSA admits no path of the requested length. Raised instead
// of returning an infinite loss so upstream data bugs surface immediately.
class NoPathError : public Error {
public:
    explicit NoPathError(const std::string& msg) : Error(msg) {}
};

// The beam search lost all hypotheses (over-pruned). Distinct from
// NoPathError: the search space was non-empty but pruning emptied it.
class OverPrunedError : public Error {
public:
    explicit OverPrunedError(const std::string& msg) : Error(msg) {}
};

// Shape or index mismatch between inputs.
class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw Error(msg);
}

}  // namespace topokit

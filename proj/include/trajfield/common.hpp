#ifndef TRAJFIELD_COMMON_HPP
#define TRAJFIELD_COMMON_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace trajfield {

inline constexpr const char* kToolVersion = "0.1.0";

using Vec3 = Eigen::Vector3d;
using Quat = Eigen::Quaterniond;

// ---------------------------------------------------------------------------
// Errors. Two categories drive the CLI exit code: bad input (1) and
// numeric/optimization failures (2).
// ---------------------------------------------------------------------------

enum class ErrorKind { input, numeric };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

#define TRAJFIELD_DEFINE_ERROR(NAME, KIND)                                          \
    class NAME : public Error {                                                     \
    public:                                                                         \
        explicit NAME(const std::string& msg) : Error(ErrorKind::KIND, msg) {}      \
    }

TRAJFIELD_DEFINE_ERROR(ConfigError, input);
TRAJFIELD_DEFINE_ERROR(DomainError, input);
TRAJFIELD_DEFINE_ERROR(ShapeError, input);
TRAJFIELD_DEFINE_ERROR(IndexError, input);
TRAJFIELD_DEFINE_ERROR(InputError, input);
TRAJFIELD_DEFINE_ERROR(IoError, input);
TRAJFIELD_DEFINE_ERROR(RankDeficiencyError, numeric);
TRAJFIELD_DEFINE_ERROR(NumericDomainError, numeric);
TRAJFIELD_DEFINE_ERROR(MetricError, numeric);
TRAJFIELD_DEFINE_ERROR(OptimizationError, numeric);
TRAJFIELD_DEFINE_ERROR(AlignmentError, numeric);
TRAJFIELD_DEFINE_ERROR(EstimationError, numeric);

#undef TRAJFIELD_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Deterministic RNG. Wraps mt19937_64 with explicit output mapping so streams
// do not depend on the standard library's distribution implementations.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return state_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(state_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). Rejection-free modulo is fine here: n is
    // always tiny relative to 2^64.
    std::uint64_t index(std::uint64_t n) { return n == 0 ? 0 : state_() % n; }

private:
    std::mt19937_64 state_;
};

// ---------------------------------------------------------------------------
// Pairwise (tree) summation. Used for every reduction whose value feeds a
// reported metric or loss so totals do not drift with traversal chunking.
// ---------------------------------------------------------------------------

inline double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 32) {
        double acc = 0.0;
        for (double v : values) acc += v;
        return acc;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

inline double pairwise_mean(std::span<const double> values) {
    if (values.empty()) return 0.0;
    return pairwise_sum(values) / static_cast<double>(values.size());
}

// ---------------------------------------------------------------------------
// parallel_for_chunks: splits [0, n) into contiguous chunks and runs `body`
// (begin, end) on a small thread pool. Chunks write to disjoint outputs;
// reductions happen afterwards in index order, so results are identical for
// any thread count.
// ---------------------------------------------------------------------------

inline void parallel_for_chunks(std::size_t n, int threads,
                                const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(n, 1));
    if (workers <= 1) {
        body(0, n);
        return;
    }
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace trajfield

#endif  // TRAJFIELD_COMMON_HPP

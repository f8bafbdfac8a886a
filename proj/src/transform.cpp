#include "dspas/transform.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "dspas/error.hpp"

namespace dspas {

namespace {

// FFTW's REDFT10 is 2x our forward sum; REDFT01 is L times our inverse.
// Planning is not thread-safe, so plans are cached behind a mutex and executed
// with the new-array interface.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(std::size_t n, fftw_r2r_kind kind) {
        std::lock_guard lock(mutex_);
        auto& slot = plans_[{n, kind}];
        if (slot == nullptr) {
            std::vector<double> in(n), out(n);
            slot = fftw_plan_r2r_1d(static_cast<int>(n), in.data(), out.data(), kind, FFTW_ESTIMATE | FFTW_UNALIGNED);
            if (slot == nullptr) {
                throw Error("FFTW could not plan a transform of size " + std::to_string(n));
            }
        }
        return slot;
    }

    ~PlanCache() {
        for (auto& [key, plan] : plans_) {
            fftw_destroy_plan(plan);
        }
    }

private:
    std::mutex mutex_;
    std::map<std::pair<std::size_t, fftw_r2r_kind>, fftw_plan> plans_;
};

} // namespace

CoefficientChunk dct_forward(std::span<const double> x, std::size_t transform_size, std::uint32_t chunk_index) {
    if (x.size() != transform_size || transform_size == 0) {
        throw ContractViolation("dct_forward expects " + std::to_string(transform_size) + " samples, got " +
                                std::to_string(x.size()));
    }
    CoefficientChunk out;
    out.chunk_index = chunk_index;
    out.coeffs.resize(transform_size);
    std::vector<double> in(x.begin(), x.end());
    fftw_execute_r2r(PlanCache::instance().get(transform_size, FFTW_REDFT10), in.data(), out.coeffs.data());
    for (auto& c : out.coeffs) {
        c *= 0.5;
    }
    return out;
}

std::vector<double> dct_inverse(const CoefficientChunk& chunk, std::size_t transform_size) {
    if (chunk.coeffs.size() != transform_size || transform_size == 0) {
        throw ContractViolation("dct_inverse expects " + std::to_string(transform_size) + " coefficients, got " +
                                std::to_string(chunk.coeffs.size()));
    }
    std::vector<double> in = chunk.coeffs;
    std::vector<double> out(transform_size);
    fftw_execute_r2r(PlanCache::instance().get(transform_size, FFTW_REDFT01), in.data(), out.data());
    const double scale = 1.0 / static_cast<double>(transform_size);
    for (auto& v : out) {
        v *= scale;
    }
    return out;
}

} // namespace dspas

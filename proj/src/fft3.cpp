#include "magdecay/fft3.hpp"

#include <fftw3.h>

#include <map>
#include <memory>
#include <mutex>

namespace magdecay {

Fft3::Fft3(int n) : n_(n) {
    std::size_t total = std::size_t(n) * n * n;
    std::vector<cplx> scratch(total);
    auto* ptr = reinterpret_cast<fftw_complex*>(scratch.data());
    plan_fwd_ = fftw_plan_dft_3d(n, n, n, ptr, ptr, FFTW_FORWARD, FFTW_ESTIMATE);
    plan_bwd_ = fftw_plan_dft_3d(n, n, n, ptr, ptr, FFTW_BACKWARD, FFTW_ESTIMATE);
}

Fft3::~Fft3() {
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_bwd_));
}

void Fft3::forward(std::vector<cplx>& data) const {
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_), ptr, ptr);
}

void Fft3::backward(std::vector<cplx>& data) const {
    auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
    fftw_execute_dft(static_cast<fftw_plan>(plan_bwd_), ptr, ptr);
    double s = 1.0 / (double(n_) * n_ * n_);
    for (auto& v : data) v *= s;
}

const Fft3& fft_for(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<Fft3>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<Fft3>(n);
    return *slot;
}

}  // namespace magdecay

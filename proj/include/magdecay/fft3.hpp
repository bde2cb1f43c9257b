#pragma once

#include <complex>
#include <vector>

#include "magdecay/grid.hpp"

namespace magdecay {

/// Thin FFTW wrapper for in-place 3D complex transforms on n^3 data.
/// Plans are cached per size. Backward transform is normalized by 1/n^3.
class Fft3 {
  public:
    explicit Fft3(int n);
    ~Fft3();
    Fft3(const Fft3&) = delete;
    Fft3& operator=(const Fft3&) = delete;

    void forward(std::vector<cplx>& data) const;
    void backward(std::vector<cplx>& data) const;

    int n() const { return n_; }

  private:
    int n_;
    void* plan_fwd_;
    void* plan_bwd_;
};

/// Shared plan per grid size.
const Fft3& fft_for(int n);

}  // namespace magdecay

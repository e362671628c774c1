#include "elfpie/fft.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace elfpie::ops {
namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per (shape, direction) and never freed.
class PlanCache {
 public:
  fftw_plan get(std::size_t width, std::size_t height, int sign) {
    std::lock_guard<std::mutex> lock(mutex_);
    const auto key = std::make_tuple(width, height, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    auto* scratch = fftw_alloc_complex(width * height);
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width),
                                      scratch, scratch, sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

// Moves the centered origin to index 0 (ifftshift) on the way in, runs the
// transform in place, then moves index 0 back to the center (fftshift).
ComplexField centered_transform(const ComplexField& in, int sign) {
  const std::size_t w = in.width();
  const std::size_t h = in.height();
  const std::size_t cx = w / 2;
  const std::size_t cy = h / 2;
  ComplexField work(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      work((x + w - cx) % w, (y + h - cy) % h) = in(x, y);
    }
  }
  fftw_plan plan = plan_cache().get(w, h, sign);
  auto* buf = reinterpret_cast<fftw_complex*>(work.data());
  fftw_execute_dft(plan, buf, buf);

  const double scale = 1.0 / std::sqrt(static_cast<double>(w * h));
  ComplexField out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      out((x + cx) % w, (y + cy) % h) = work(x, y) * scale;
    }
  }
  return out;
}

}  // namespace

ComplexField dft2(const ComplexField& field) {
  return centered_transform(field, FFTW_FORWARD);
}

ComplexField idft2(const ComplexField& field) {
  return centered_transform(field, FFTW_BACKWARD);
}

ComplexField to_complex(const RealPlane& plane) {
  ComplexField out(plane.width(), plane.height());
  for (std::size_t i = 0; i < plane.size(); ++i) out[i] = plane[i];
  return out;
}

}  // namespace elfpie::ops

// Serial reference for the dense annotator. Kept free of OpenMP so tests and
// benchmarks have a fixed baseline to compare the parallel kernel against.

#include "covis/covisibility.hpp"
#include "covis/errors.hpp"

namespace covis {

CovisMap annotate_pair_reference(const CameraFrame& src, const CameraFrame& tgt,
                                 const AnnotateOptions& opts) {
  src.validate();
  tgt.validate();
  if (!(opts.tolerance.relative >= 0.0) || !(opts.tolerance.absolute >= 0.0))
    throw ConfigError("occlusion tolerance must be non-negative");

  CovisMap out(src.intrinsics.width, src.intrinsics.height);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x) out.at(x, y) = classify_pixel(src, tgt, x, y, opts);
  return out;
}

}  // namespace covis

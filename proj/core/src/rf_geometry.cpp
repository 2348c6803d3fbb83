#include "mrfp/rf_geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace mrfp {

namespace {

void check_query(const RfQuery& q) {
  if (q.layer_index < 1) throw std::domain_error("rf: layer_index must be >= 1");
  if (q.kernel_side < 1 || q.kernel_side % 2 == 0)
    throw std::domain_error("rf: kernel_side must be a positive odd integer");
}

Rational pow4(int e) {
  Rational r = 1;
  const Rational four = 4;
  for (int i = 0; i < e; ++i) r = r * four;
  return r;
}

}  // namespace

Rational rf_undercomplete(const RfQuery& q) {
  check_query(q);
  const Rational k2 = Rational(q.kernel_side) * Rational(q.kernel_side);
  return pow4(q.layer_index - 1) * k2;
}

Rational rf_overcomplete(const RfQuery& q) {
  check_query(q);
  const Rational k2 = Rational(q.kernel_side) * Rational(q.kernel_side);
  return k2 / pow4(q.layer_index - 1);
}

ScaleSchedule make_schedule(int depth, double osf) {
  if (depth < 1) throw std::domain_error("make_schedule: depth must be >= 1");
  if (!(osf > 0.0)) throw std::domain_error("make_schedule: osf must be positive");
  ScaleSchedule s;
  s.overall_scale_factor = osf;
  s.per_layer_factor = std::pow(osf, 1.0 / depth);
  s.cumulative_scales.resize(depth);
  for (int l = 0; l < depth; ++l)
    s.cumulative_scales[l] = std::pow(osf, static_cast<double>(l + 1) / depth);
  return s;
}

int scaled_size(double scale, int size) {
  const int r = static_cast<int>(std::floor(scale * size + 0.5));
  return r < 1 ? 1 : r;
}

}  // namespace mrfp

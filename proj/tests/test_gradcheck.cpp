#include <doctest.h>

#include "model_gradcheck.hpp"

using namespace ctxnmt;

TEST_CASE("full forward_loss gradients match finite differences, all variants") {
  for (Variant v : kAllVariants) {
    CAPTURE(to_string(v));
    const auto r = model_gradcheck::full_forward(v);
    CAPTURE(r.f64.where);
    CAPTURE(r.f32.where);
    CHECK(r.f64.rel < 1e-5);
    CHECK(r.f32.rel < 1e-3);
  }
}

#pragma once

#include "migate/gradcheck.hpp"
#include "migate/model.hpp"

namespace migate {

// Small geometry (8x8 images -> 2x2x4 maps) so finite differences over every
// parameter stay fast.
ModelConfig tiny_model_config(ContextKind context = ContextKind::irnn2,
                              FusionMode fusion = FusionMode::gated);

// End-to-end check: batch loss over a 4-image / 2-identity micro-batch
// (two positive pairs among the scored set), analytic gradients from the
// training path vs central differences of the total loss. Dropout off.
GradCheckReport composite_grad_check(uint64_t seed, double eps, double tol);

// Per-module finite-difference suites; `module` names the layer under test.
struct ModuleCheck {
  std::string module;
  GradCheckReport report;
};
std::vector<ModuleCheck> module_grad_checks(uint64_t seed, double eps,
                                            double tol);

}  // namespace migate

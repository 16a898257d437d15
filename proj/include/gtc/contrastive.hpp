#pragma once

#include <cstddef>
#include <string>

#include "gtc/autodiff.hpp"
#include "gtc/graph.hpp"
#include "gtc/layers.hpp"

namespace gtc::contrast {

struct ContrastConfig {
  double tau = 0.6;
  double lambda = 0.4;
  int theta_pos = 2;
  CountMode mode = CountMode::binary;
  bool head = true;
  std::size_t head_dim = 64;

  // Throws ConfigError for tau <= 0, lambda outside [0, 1] or theta_pos < 1.
  void validate() const;
};

/// Projection into the contrast space: affine, ELU, affine. A disabled head
/// is the identity.
struct ContrastHead {
  bool enabled = true;
  Affine hidden;
  Affine output;

  static ContrastHead init(std::size_t in_dim, std::size_t out_dim, Rng& rng);
  static ContrastHead disabled() { return ContrastHead{false, {}, {}}; }
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

ad::Var project_to_contrast_space(ad::Tape& tape, const ad::Var& z, const ContrastHead& head);

// Throws ConfigError when the two views can not be compared: a disabled head
// with differing embedding widths.
void check_contrast_dims(std::size_t schema_dim, std::size_t hops_dim, const ContrastHead& schema_head,
                         const ContrastHead& hops_head);

struct LossTerms {
  ad::Var total;           // lambda * mean(L^sv) + (1 - lambda) * mean(L^hv)
  ad::Var schema_view;     // mean over nodes of L_i^sv
  ad::Var hops_view;       // mean over nodes of L_i^hv
  std::size_t degenerate;  // nodes without negatives (contribute 0)
};

// Cosine-similarity InfoNCE in both directions. Row i of each view belongs to
// node i of `sets`. Throws NumericError naming the node for a zero-norm row.
LossTerms contrastive_loss(const ad::Var& z_sv, const ad::Var& z_hv, const ContrastiveSets& sets, double tau, double lambda);

}  // namespace gtc::contrast

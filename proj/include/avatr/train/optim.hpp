#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "avatr/tensor.hpp"

namespace avatr::train {

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Per-parameter first/second moments and step counts.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::vector<std::size_t> t;
};

// Bias-corrected Adam on p.grad. A tensor whose gradient is absent or all
// zero is left untouched together with its moments.
template <typename T>
void adam_step(std::span<ad::Tensor<T>* const> params, AdamState& state, double lr, const AdamOptions& options = {});

// Scales all gradients so their joint L2 norm is at most max_norm; returns
// the norm before clipping. max_norm <= 0 only measures.
template <typename T>
double clip_grad_norm(std::span<ad::Tensor<T>* const> params, double max_norm);

struct PlateauOptions {
  std::size_t patience = 10;
  double factor = 0.5;
  double min_delta = 1e-4;
  double floor = 1e-7;
};

// Multiplies the rate by `factor` once the best validation loss has failed
// to improve by min_delta for `patience` consecutive epochs.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, PlateauOptions options);

  // Records one validation loss and returns the rate for the next epoch.
  double step(double val_loss);
  double lr() const { return lr_; }
  double best() const { return best_; }
  std::size_t bad_epochs() const { return bad_epochs_; }

 private:
  double lr_;
  PlateauOptions options_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_epochs_ = 0;
};

}  // namespace avatr::train

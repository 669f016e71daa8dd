#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fewshot/losses.hpp"
#include "fewshot/sampler.hpp"

namespace fewshot {

/// Full-batch Adam settings shared by every trained method.
struct OptimizerConfig {
  int iterations = 150;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct EpisodePrediction {
  std::vector<int> predicted;       // local class index per query row
  ProbabilityMatrix probabilities;  // queries x ways
  double train_seconds = 0.0;
};

struct TrainOutcome {
  SoftmaxHead head;
  EpisodePrediction prediction;
  std::vector<double> loss_history;  // objective per iteration, before the step
};

/// Head initialized from class prototypes: row k of W is the mean support
/// vector of class k, bias zero.
SoftmaxHead init_head(const Episode& episode);

/// Full-batch Adam on objective(head, episode, spec). Throws TrainingError
/// if the objective goes non-finite, naming the iteration and method.
TrainOutcome train_head(const Episode& episode, const MethodSpec& spec,
                        const OptimizerConfig& opt);

/// Softmax over negative squared distances to class prototypes. No training.
EpisodePrediction prototypical_predict(const Episode& episode);

struct SslOutcome {
  SoftmaxHead labeler;      // stage-one head that produced the pseudo-labels
  SoftmaxHead final_head;   // stage-two head trained on support + pseudo-labels
  std::size_t final_train_size = 0;
  EpisodePrediction prediction;
};

/// Stage one trains plain cross-entropy on the support set; its argmax over
/// the query set becomes pseudo-labels; stage two retrains from a fresh
/// prototype init on support plus pseudo-labeled queries, equal weight.
SslOutcome ssl_train(const Episode& episode, const OptimizerConfig& opt);

/// Dispatch on spec.method; every path returns query predictions and the
/// wall-clock seconds spent fitting.
EpisodePrediction run_method(const Episode& episode, const MethodSpec& spec,
                             const OptimizerConfig& opt);

/// Row-wise argmax; ties resolve to the lowest column index.
std::vector<int> argmax_rows(const ProbabilityMatrix& probs);

}  // namespace fewshot

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "fewshot/corpus.hpp"

namespace fewshot {

struct EvalAccess;

/// Parameters of one sampled task. (seed, episode_index) fully determine the
/// episode for a given corpus.
struct EpisodeSpec {
  int ways = 5;               // K
  int shots = 5;              // labeled examples per class
  int queries_per_class = 15; // unlabeled examples per class
  std::uint64_t seed = 0;
  std::uint64_t episode_index = 0;

  void validate() const;
};

/// A sampled K-way task: a labeled support set and an unlabeled query set,
/// both stratified and disjoint, with labels remapped to local indices
/// 0..K-1 in class draw order. The query labels are held out: only the
/// metrics module can reach them, through EvalAccess.
class Episode {
 public:
  Episode(EpisodeSpec spec, std::vector<std::string> class_map,
          Eigen::MatrixXd support_vectors, std::vector<int> support_labels,
          Eigen::MatrixXd query_vectors, std::vector<int> query_labels,
          std::vector<std::size_t> support_indices,
          std::vector<std::size_t> query_indices);

  int ways() const { return spec_.ways; }
  int shots() const { return spec_.shots; }
  int queries_per_class() const { return spec_.queries_per_class; }
  std::uint64_t seed() const { return spec_.seed; }
  std::uint64_t index() const { return spec_.episode_index; }
  int dim() const { return static_cast<int>(support_vectors_.cols()); }

  /// Local class index -> original class name, in draw order.
  const std::vector<std::string>& class_map() const { return class_map_; }

  const Eigen::MatrixXd& support_vectors() const { return support_vectors_; }
  const std::vector<int>& support_labels() const { return support_labels_; }
  const Eigen::MatrixXd& query_vectors() const { return query_vectors_; }

  /// Positions into the source corpus, for audit dumps.
  const std::vector<std::size_t>& support_indices() const { return support_indices_; }
  const std::vector<std::size_t>& query_indices() const { return query_indices_; }

 private:
  EpisodeSpec spec_;
  std::vector<std::string> class_map_;
  Eigen::MatrixXd support_vectors_;
  std::vector<int> support_labels_;
  Eigen::MatrixXd query_vectors_;
  std::vector<int> query_labels_;  // evaluation only
  std::vector<std::size_t> support_indices_;
  std::vector<std::size_t> query_indices_;

  friend struct EvalAccess;
};

/// Draws one episode. Classes with fewer than shots+queries records are
/// excluded from eligibility before class sampling; classes are drawn
/// uniformly without replacement, then records uniformly without replacement
/// within each class.
Episode sample_episode(const LabeledCorpus& corpus, const EpisodeSpec& spec);

/// Random-access sequence of `count` episodes sharing one run seed. Episode i
/// never depends on episode i-1 having been generated.
class EpisodeStream {
 public:
  EpisodeStream(const LabeledCorpus& corpus, EpisodeSpec base, std::uint64_t count);

  std::uint64_t size() const { return count_; }
  Episode operator[](std::uint64_t i) const;

 private:
  const LabeledCorpus* corpus_;
  EpisodeSpec base_;
  std::uint64_t count_;
};

EpisodeStream episode_stream(const LabeledCorpus& corpus, int ways, int shots,
                             int queries_per_class, std::uint64_t episodes,
                             std::uint64_t seed);

}  // namespace fewshot

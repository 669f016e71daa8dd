#include "fewshot/sampler.hpp"

#include <utility>

#include "fewshot/errors.hpp"
#include "fewshot/rng.hpp"

namespace fewshot {

void EpisodeSpec::validate() const {
  if (ways < 2) throw ValidationError("ways must be at least 2");
  if (shots < 1) throw ValidationError("shots must be at least 1");
  if (queries_per_class < 1) throw ValidationError("queries per class must be at least 1");
}

Episode::Episode(EpisodeSpec spec, std::vector<std::string> class_map,
                 Eigen::MatrixXd support_vectors, std::vector<int> support_labels,
                 Eigen::MatrixXd query_vectors, std::vector<int> query_labels,
                 std::vector<std::size_t> support_indices,
                 std::vector<std::size_t> query_indices)
    : spec_(spec),
      class_map_(std::move(class_map)),
      support_vectors_(std::move(support_vectors)),
      support_labels_(std::move(support_labels)),
      query_vectors_(std::move(query_vectors)),
      query_labels_(std::move(query_labels)),
      support_indices_(std::move(support_indices)),
      query_indices_(std::move(query_indices)) {
  spec_.validate();
  const std::size_t ns = static_cast<std::size_t>(spec_.ways) * spec_.shots;
  const std::size_t nq = static_cast<std::size_t>(spec_.ways) * spec_.queries_per_class;
  if (class_map_.size() != static_cast<std::size_t>(spec_.ways) ||
      static_cast<std::size_t>(support_vectors_.rows()) != ns ||
      support_labels_.size() != ns || support_indices_.size() != ns ||
      static_cast<std::size_t>(query_vectors_.rows()) != nq ||
      query_labels_.size() != nq || query_indices_.size() != nq ||
      support_vectors_.cols() != query_vectors_.cols()) {
    throw ValidationError("episode shape is inconsistent with its spec");
  }
}

Episode sample_episode(const LabeledCorpus& corpus, const EpisodeSpec& spec) {
  spec.validate();
  const std::size_t per_class =
      static_cast<std::size_t>(spec.shots) + static_cast<std::size_t>(spec.queries_per_class);

  std::vector<std::string> eligible;
  for (const std::string& label : corpus.label_space()) {
    if (corpus.positions(label).size() >= per_class) eligible.push_back(label);
  }
  if (eligible.size() < static_cast<std::size_t>(spec.ways)) {
    throw ValidationError(
        "episode needs " + std::to_string(spec.ways) + " classes with at least " +
        std::to_string(per_class) + " records each, but only " +
        std::to_string(eligible.size()) + " classes are eligible");
  }

  std::mt19937_64 gen(child_seed(spec.seed, spec.episode_index));

  std::vector<std::string> class_map;
  class_map.reserve(spec.ways);
  for (std::size_t pick : sample_without_replacement(gen, eligible.size(), spec.ways)) {
    class_map.push_back(eligible[pick]);
  }

  const Eigen::Index d = static_cast<Eigen::Index>(corpus.dim());
  Eigen::MatrixXd support(static_cast<Eigen::Index>(spec.ways) * spec.shots, d);
  Eigen::MatrixXd query(static_cast<Eigen::Index>(spec.ways) * spec.queries_per_class, d);
  std::vector<int> support_labels(static_cast<std::size_t>(support.rows()));
  std::vector<int> query_labels(static_cast<std::size_t>(query.rows()));
  std::vector<std::size_t> support_indices(support_labels.size());
  std::vector<std::size_t> query_indices(query_labels.size());

  for (int k = 0; k < spec.ways; ++k) {
    const std::vector<std::size_t>& pool = corpus.positions(class_map[static_cast<std::size_t>(k)]);
    const std::vector<std::size_t> picks = sample_without_replacement(gen, pool.size(), per_class);
    for (int s = 0; s < spec.shots; ++s) {
      const std::size_t row = static_cast<std::size_t>(k) * spec.shots + s;
      const std::size_t pos = pool[picks[static_cast<std::size_t>(s)]];
      support.row(static_cast<Eigen::Index>(row)) = corpus.records()[pos].vector.transpose();
      support_labels[row] = k;
      support_indices[row] = pos;
    }
    for (int q = 0; q < spec.queries_per_class; ++q) {
      const std::size_t row = static_cast<std::size_t>(k) * spec.queries_per_class + q;
      const std::size_t pos = pool[picks[static_cast<std::size_t>(spec.shots + q)]];
      query.row(static_cast<Eigen::Index>(row)) = corpus.records()[pos].vector.transpose();
      query_labels[row] = k;
      query_indices[row] = pos;
    }
  }

  return Episode(spec, std::move(class_map), std::move(support), std::move(support_labels),
                 std::move(query), std::move(query_labels), std::move(support_indices),
                 std::move(query_indices));
}

EpisodeStream::EpisodeStream(const LabeledCorpus& corpus, EpisodeSpec base, std::uint64_t count)
    : corpus_(&corpus), base_(base), count_(count) {
  if (count_ < 1) throw ValidationError("episode count must be at least 1");
  base_.validate();
}

Episode EpisodeStream::operator[](std::uint64_t i) const {
  if (i >= count_) {
    throw ValidationError("episode index " + std::to_string(i) + " out of range (" +
                          std::to_string(count_) + " episodes)");
  }
  EpisodeSpec spec = base_;
  spec.episode_index = i;
  return sample_episode(*corpus_, spec);
}

EpisodeStream episode_stream(const LabeledCorpus& corpus, int ways, int shots,
                             int queries_per_class, std::uint64_t episodes,
                             std::uint64_t seed) {
  EpisodeSpec spec;
  spec.ways = ways;
  spec.shots = shots;
  spec.queries_per_class = queries_per_class;
  spec.seed = seed;
  spec.episode_index = 0;
  return EpisodeStream(corpus, spec, episodes);
}

}  // namespace fewshot

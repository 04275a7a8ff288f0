#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mml/rng.hpp"
#include "mml/tensor.hpp"

namespace mml {

/// Recipe for a desk-scale bimodal dataset: a reliable shape channel (gray
/// modality) and a spurious color channel whose label agreement flips
/// between train and validation/test.
struct GeneratorSpec {
  std::size_t classes = 10;
  std::size_t image_size = 12;
  std::size_t train_size = 5000;
  std::size_t val_size = 1000;
  std::size_t test_size = 1000;
  double p_train = 0.99;  // color-label agreement, must be >= 1/classes
  double p_val = 0.1;
  double p_test = 0.1;
  double shape_noise = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Split {
  Tensor x0;  // [n x C0 x S x S]
  Tensor x1;  // [n x C1 x S x S]
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Tensor batch_x0(const std::vector<std::size_t>& idx) const;
  Tensor batch_x1(const std::vector<std::size_t>& idx) const;
  std::vector<int> batch_labels(const std::vector<std::size_t>& idx) const;
};

struct BimodalDataset {
  Split train, val, test;
  GeneratorSpec spec;
  std::string kind;  // "shortcut" | "duplicated-m0" | "duplicated-m1"
  std::size_t c0 = 3, c1 = 1;
};

/// The colored-and-gray analog: per-class binary prototype patterns rendered
/// (with noise) into the gray modality, the same pattern tinted with a color
/// whose index agrees with the label with probability p_<split>.
BimodalDataset gen_shortcut_bimodal(const GeneratorSpec& spec);

/// Control set with two identical input modalities. The source modality is
/// harmonized to three channels by replication and placed in both slots.
BimodalDataset gen_duplicated(const GeneratorSpec& spec, int source_modality);

/// Seeded permutation chopped into fixed-size batches; the final short batch
/// is kept.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   std::size_t batch_size,
                                                   std::uint64_t epoch_seed);

void save_dataset(const BimodalDataset& ds, const std::string& dir);
BimodalDataset load_dataset(const std::string& dir);

/// The fixed K-color palette used for tinting (RGB in [0,1], hue wheel).
std::vector<std::array<double, 3>> color_palette(std::size_t k);

}  // namespace mml

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lrcnn/arch.hpp"

namespace lrcnn {

struct BuildOptions {
  /// Dropout after fc6 and fc7 of the VGG family. Off unless asked for.
  double fc_dropout = 0.0;
};

/// The eight VGG-family columns (input 3x224x224, 1000 classes):
/// vgg11, vgg-gmp, vgg-gmp-sf, vgg-gmp-lr, vgg-gmp-lr-2x, vgg-gmp-lr-join,
/// vgg-gmp-lr-lde, vgg-gmp-lr-join-wfull. "vgg-11" is accepted for vgg11.
ArchSpec build(const std::string& name, const BuildOptions& options = {});

/// Small CIFAR-10 networks: desk-full (3x3 filters) and desk-lr (the same
/// blocks with each 3x3 layer replaced by a join-free 3x1 || 1x3 composite).
ArchSpec build_desk(const std::string& name);

/// Resolves either family; throws std::invalid_argument listing every name.
ArchSpec build_any(const std::string& name);

std::vector<std::string> vgg_model_names();
std::vector<std::string> desk_model_names();
/// All names, sorted.
std::vector<std::string> model_names();

/// Receptive field (rows, cols) of one output of layer `upto` (inclusive) with
/// respect to the network input, following conv, composite and pooling layers.
std::pair<std::size_t, std::size_t> receptive_field(const ArchSpec& arch, std::size_t upto);

}  // namespace lrcnn

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "graphsync/dense_matrix.hpp"
#include "graphsync/random.hpp"

namespace graphsync {

/// Node features (n×h), weighted adjacency (n×n, zero diagonal, nonnegative)
/// and a class label in [1, N] per node.
struct Graph {
    DenseMatrix features;
    DenseMatrix adjacency;
    std::vector<int> labels;

    std::size_t size() const noexcept { return features.rows(); }
    /// Throws on any broken invariant.
    void validate() const;
};

/// Per graph, the universe slot of each node; outliers carry no slot.
using SlotAssignment = std::vector<std::optional<std::size_t>>;

struct InstanceMeta {
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t h = 0;
    std::size_t classes = 1;
    double noise_sigma = 0.0;
    std::size_t outliers = 0;
    std::uint64_t seed = 0;
};

struct Instance {
    std::vector<Graph> graphs;
    std::optional<std::vector<SlotAssignment>> truth;
    InstanceMeta meta;

    std::size_t max_graph_size() const;
    void validate() const;
};

struct AdjacencyParams {
    DenseMatrix wx;
    DenseMatrix wy;
    double drop_rate = 0.1;
    double epsilon = 1e-6;
    /// DropEdge only fires in training mode.
    bool training_mode = false;

    static AdjacencyParams identity(std::size_t h);
    void validate(std::size_t h) const;
};

/// D_ab = 1 - cos(v_a, v_b); symmetric, zero diagonal, entries in [0, 2].
DenseMatrix cosine_distance(const DenseMatrix& features);

/// Row-softmax of (V Wx)(V Wy)^T times the elementwise reciprocal of
/// (D + epsilon), zero diagonal, then each off-diagonal entry dropped with
/// probability drop_rate when training. rng is only consumed when dropping.
DenseMatrix build_adjacency(const DenseMatrix& features, const AdjacencyParams& params, Rng& rng);

struct NodeSample {
    DenseMatrix features;
    std::vector<int> labels;
};

/// Visits grid cells (r, c) with r and c multiples of step in row-major order
/// and keeps the foreground ones (label >= 1).
NodeSample sample_nodes(const DenseMatrix& feature_grid, std::size_t grid_height,
                        std::size_t grid_width, const std::vector<int>& mask, std::size_t step);

struct SyntheticParams {
    std::size_t m = 4;
    std::size_t n = 6;
    std::size_t h = 8;
    double noise_sigma = 0.0;
    std::size_t outliers = 0;
    std::size_t classes = 2;
};

/// Shared node prototypes of a synthetic family; prototype p has class
/// (p mod classes) + 1.
struct Prototypes {
    DenseMatrix features;
    std::vector<int> labels;
};

Prototypes make_prototypes(std::size_t n, std::size_t h, std::size_t classes, Rng& rng);

/// m graphs, each holding every prototype under its own random node order,
/// Gaussian feature noise and `outliers` extra random nodes without a slot.
Instance make_synthetic(const SyntheticParams& params, Rng& rng);
Instance make_synthetic(const SyntheticParams& params, std::uint64_t seed);
/// Same construction over prototypes drawn elsewhere, e.g. fresh test
/// batches for an embedding fitted on the same family.
Instance make_synthetic_from(const Prototypes& prototypes, const SyntheticParams& params, Rng& rng);

void save_instance(const std::string& dir, const Instance& instance);
Instance load_instance(const std::string& dir);

}  // namespace graphsync

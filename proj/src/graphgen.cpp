#include "graphsync/graphgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "graphsync/error.hpp"
#include "graphsync/matcore.hpp"

namespace graphsync {

namespace fs = std::filesystem;

void Graph::validate() const {
    const std::size_t n = features.rows();
    if (!(adjacency.rows() == n && adjacency.cols() == n)) fail(ErrorKind::dimension,
            "adjacency " + shape_string(adjacency) + " does not match " + std::to_string(n) + " nodes");
    require(labels.size() == n, ErrorKind::dimension, "label count does not match node count");
    for (int y : labels) require(y >= 1, ErrorKind::label, "class labels start at 1");
    require_finite(features, "node features");
    require_finite(adjacency, "adjacency");
    for (std::size_t a = 0; a < n; ++a) {
        require(adjacency(a, a) == 0.0, ErrorKind::input, "adjacency diagonal must be zero");
        for (double v : adjacency.row(a)) require(v >= 0.0, ErrorKind::input, "negative adjacency entry");
    }
}

std::size_t Instance::max_graph_size() const {
    std::size_t out = 0;
    for (const auto& g : graphs) out = std::max(out, g.size());
    return out;
}

void Instance::validate() const {
    for (const auto& g : graphs) g.validate();
    if (!truth) return;
    require(truth->size() == graphs.size(), ErrorKind::dimension, "truth/graph count mismatch");
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        const auto& slots = (*truth)[i];
        require(slots.size() == graphs[i].size(), ErrorKind::dimension, "truth/node count mismatch");
        std::vector<std::size_t> used;
        for (const auto& s : slots)
            if (s) used.push_back(*s);
        std::sort(used.begin(), used.end());
        if (!(std::adjacent_find(used.begin(), used.end()) == used.end())) fail(ErrorKind::input,
                "two nodes of graph " + std::to_string(i) + " share a universe slot");
    }
}

AdjacencyParams AdjacencyParams::identity(std::size_t h) {
    AdjacencyParams p;
    p.wx = DenseMatrix::identity(h);
    p.wy = DenseMatrix::identity(h);
    return p;
}

void AdjacencyParams::validate(std::size_t h) const {
    if (!(wx.rows() == h && wx.cols() == h && wy.rows() == h && wy.cols() == h)) fail(ErrorKind::dimension,
            "projection weights must be " + std::to_string(h) + "x" + std::to_string(h));
    require(drop_rate >= 0.0 && drop_rate <= 1.0, ErrorKind::parameter, "drop_rate must lie in [0,1]");
    require(epsilon > 0.0, ErrorKind::parameter, "epsilon must be > 0");
}

DenseMatrix cosine_distance(const DenseMatrix& features) {
    require_finite(features, "node features");
    const std::size_t n = features.rows();
    std::vector<double> norms(n);
    for (std::size_t a = 0; a < n; ++a) {
        double s = 0.0;
        for (double v : features.row(a)) s += v * v;
        norms[a] = std::sqrt(s);
        if (!(norms[a] > 0.0)) fail(ErrorKind::degenerate_feature,
                "node " + std::to_string(a) + " has a zero feature vector");
    }
    const DenseMatrix gram = matmul_nt(features, features);
    DenseMatrix dist(n, n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            const double cosine = std::clamp(gram(a, b) / (norms[a] * norms[b]), -1.0, 1.0);
            dist(a, b) = dist(b, a) = 1.0 - cosine;
        }
    return dist;
}

DenseMatrix build_adjacency(const DenseMatrix& features, const AdjacencyParams& params, Rng& rng) {
    params.validate(features.cols());
    const std::size_t n = features.rows();
    const DenseMatrix dist = cosine_distance(features);
    DenseMatrix adj = matmul_nt(matmul(features, params.wx), matmul(features, params.wy));

    for (std::size_t a = 0; a < n; ++a) {
        auto row = adj.row(a);
        const double peak = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (double& v : row) total += (v = std::exp(v - peak));
        for (std::size_t b = 0; b < n; ++b) row[b] = row[b] / total / (dist(a, b) + params.epsilon);
        row[a] = 0.0;
    }

    const double drop = params.training_mode ? params.drop_rate : 0.0;
    if (drop > 0.0) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (std::size_t a = 0; a < n; ++a)
            for (std::size_t b = 0; b < n; ++b)
                if (a != b && u(rng) < drop) adj(a, b) = 0.0;
    }
    return adj;
}

NodeSample sample_nodes(const DenseMatrix& feature_grid, std::size_t grid_height,
                        std::size_t grid_width, const std::vector<int>& mask, std::size_t step) {
    require(step >= 1, ErrorKind::parameter, "sampling step must be >= 1");
    if (!(feature_grid.rows() == grid_height * grid_width)) fail(ErrorKind::dimension,
            "feature grid has " + std::to_string(feature_grid.rows()) + " rows for a " +
                std::to_string(grid_height) + "x" + std::to_string(grid_width) + " grid");
    require(mask.size() == grid_height * grid_width, ErrorKind::dimension, "mask size mismatch");

    std::vector<std::size_t> cells;
    for (std::size_t r = 0; r < grid_height; r += step)
        for (std::size_t c = 0; c < grid_width; c += step) {
            const std::size_t cell = r * grid_width + c;
            if (mask[cell] >= 1) cells.push_back(cell);
        }
    require(!cells.empty(), ErrorKind::empty_mask, "no foreground cell on the sampling lattice");

    NodeSample out{DenseMatrix(cells.size(), feature_grid.cols()), {}};
    out.labels.reserve(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto src = feature_grid.row(cells[i]);
        std::copy(src.begin(), src.end(), out.features.row(i).begin());
        out.labels.push_back(mask[cells[i]]);
    }
    return out;
}

Prototypes make_prototypes(std::size_t n, std::size_t h, std::size_t classes, Rng& rng) {
    require(n >= 2 && h >= 2, ErrorKind::parameter, "synthetic instances need n >= 2 and h >= 2");
    require(classes >= 1, ErrorKind::parameter, "need at least one class");
    Prototypes p{standard_normal(n, h, rng), std::vector<int>(n)};
    for (std::size_t i = 0; i < n; ++i) p.labels[i] = static_cast<int>(i % classes) + 1;
    return p;
}

Instance make_synthetic_from(const Prototypes& prototypes, const SyntheticParams& params, Rng& rng) {
    const std::size_t n = prototypes.features.rows(), h = prototypes.features.cols();
    require(params.noise_sigma >= 0.0, ErrorKind::parameter, "noise_sigma must be >= 0");
    const std::size_t total = n + params.outliers;

    Instance inst;
    inst.meta = {params.m, n, h, params.classes, params.noise_sigma, params.outliers, 0};
    inst.truth.emplace();
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_int_distribution<int> any_class(1, static_cast<int>(params.classes));
    const AdjacencyParams adjacency = [&] {
        auto p = AdjacencyParams::identity(h);
        p.drop_rate = 0.0;
        return p;
    }();

    for (std::size_t g = 0; g < params.m; ++g) {
        // order[position] = source node; sources >= n are outliers
        std::vector<std::size_t> order(total);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        Graph graph{DenseMatrix(total, h), {}, std::vector<int>(total)};
        SlotAssignment slots(total);
        for (std::size_t pos = 0; pos < total; ++pos) {
            const std::size_t src = order[pos];
            auto row = graph.features.row(pos);
            if (src < n) {
                const auto proto = prototypes.features.row(src);
                for (std::size_t c = 0; c < h; ++c) row[c] = proto[c] + params.noise_sigma * z(rng);
                graph.labels[pos] = prototypes.labels[src];
                slots[pos] = src;
            } else {
                for (double& v : row) v = z(rng);
                graph.labels[pos] = any_class(rng);
            }
        }
        graph.adjacency = build_adjacency(graph.features, adjacency, rng);
        inst.graphs.push_back(std::move(graph));
        inst.truth->push_back(std::move(slots));
    }
    return inst;
}

Instance make_synthetic(const SyntheticParams& params, Rng& rng) {
    const Prototypes protos = make_prototypes(params.n, params.h, params.classes, rng);
    return make_synthetic_from(protos, params, rng);
}

Instance make_synthetic(const SyntheticParams& params, std::uint64_t seed) {
    Rng rng(seed);
    Instance inst = make_synthetic(params, rng);
    inst.meta.seed = seed;
    return inst;
}

namespace {

std::string indexed(const fs::path& dir, const char* stem, std::size_t i, const char* ext) {
    return (dir / (std::string(stem) + "_" + std::to_string(i) + ext)).string();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot open " + path + " for writing");
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path);
    return in;
}

}  // namespace

void save_instance(const std::string& dir, const Instance& instance) {
    const fs::path root(dir);
    std::error_code ec;
    fs::create_directories(root, ec);
    if (ec) fail(ErrorKind::io, "cannot create " + dir + ": " + ec.message());

    {
        auto out = open_out((root / "meta").string());
        out.precision(17);
        const auto& m = instance.meta;
        out << "m=" << instance.graphs.size() << "\nn=" << m.n << "\nh=" << m.h << "\nnoise_sigma=" << m.noise_sigma
            << "\noutliers=" << m.outliers << "\nseed=" << m.seed << "\nclasses=" << m.classes << '\n';
    }
    for (std::size_t i = 0; i < instance.graphs.size(); ++i) {
        const Graph& g = instance.graphs[i];
        save_matrix(indexed(root, "V", i, ".mat"), g.features);
        save_matrix(indexed(root, "A", i, ".mat"), g.adjacency);
        auto labels = open_out(indexed(root, "Y", i, ".txt"));
        for (int y : g.labels) labels << y << '\n';
        if (instance.truth) {
            auto gt = open_out(indexed(root, "gt", i, ".txt"));
            const auto& slots = (*instance.truth)[i];
            for (std::size_t node = 0; node < slots.size(); ++node)
                if (slots[node]) gt << node << ' ' << *slots[node] << '\n';
        }
    }
}

Instance load_instance(const std::string& dir) {
    const fs::path root(dir);
    Instance inst;
    {
        auto in = open_in((root / "meta").string());
        std::string line;
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
            auto& m = inst.meta;
            try {
                if (key == "m") m.m = std::stoul(value);
                else if (key == "n") m.n = std::stoul(value);
                else if (key == "h") m.h = std::stoul(value);
                else if (key == "noise_sigma") m.noise_sigma = std::stod(value);
                else if (key == "outliers") m.outliers = std::stoul(value);
                else if (key == "seed") m.seed = std::stoull(value);
                else if (key == "classes") m.classes = std::stoul(value);
            } catch (const std::exception&) {
                fail(ErrorKind::io, dir + "/meta: bad value for " + key);
            }
        }
    }
    const bool has_truth = fs::exists(indexed(root, "gt", 0, ".txt"));
    if (has_truth) inst.truth.emplace();
    for (std::size_t i = 0; i < inst.meta.m; ++i) {
        Graph g;
        g.features = load_matrix(indexed(root, "V", i, ".mat"));
        g.adjacency = load_matrix(indexed(root, "A", i, ".mat"));
        auto labels = open_in(indexed(root, "Y", i, ".txt"));
        for (int y; labels >> y;) g.labels.push_back(y);
        if (has_truth) {
            SlotAssignment slots(g.size());
            auto gt = open_in(indexed(root, "gt", i, ".txt"));
            for (std::size_t node, slot; gt >> node >> slot;) {
                if (!(node < slots.size()))
                    fail(ErrorKind::io, "gt node index out of range in graph " + std::to_string(i));
                slots[node] = slot;
            }
            inst.truth->push_back(std::move(slots));
        }
        inst.graphs.push_back(std::move(g));
    }
    inst.validate();
    return inst;
}

}  // namespace graphsync

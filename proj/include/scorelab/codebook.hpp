#pragma once

// Hard-instance supports (hypercube, product of circles), planted codebooks
// stored as block indices, and packings of the codebook-rate axis.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace scorelab {

enum class SupportKind { hypercube, product_circle };

std::string to_string(SupportKind kind);
SupportKind parse_support_kind(const std::string& text);

/// The reference support V: a product of identical blocks. A hypercube block is
/// one coordinate with points {-1, +1}; a product-circle block is a plane with M
/// evenly spaced points on the radius-R circle.
struct SupportSpec {
  SupportKind kind = SupportKind::hypercube;
  int d = 0;
  double R = 1.0;
  double gamma = 0.1;
  int M = 2;            // points per block
  int block_count = 0;  // d (hypercube) or d/2 (product-circle)
  int block_dim = 1;    // 1 or 2
  std::vector<double> block_points;  // M x block_dim, row-major

  std::span<const double> block_point(int k) const {
    return {block_points.data() + static_cast<std::size_t>(k) * block_dim,
            static_cast<std::size_t>(block_dim)};
  }
  /// ln |V|, never materializing |V|.
  double log_cardinality() const;
  /// Stable identifier of the geometry, used to key CSV rows.
  std::uint64_t hash() const;
};

/// Builds V. Product-circle uses M = ceil(pi R / gamma); hypercube fixes R = 1.
SupportSpec build_support(SupportKind kind, int d, double R, double gamma);

/// Product-circle support with an explicitly chosen number of points per block
/// (including the degenerate M = 1). Used for small enumerable test geometries.
SupportSpec build_circle_support_with_points(int d, double R, double gamma, int M);

/// ln(1 + |V|).
double log1p_cardinality(const SupportSpec& spec);

/// Per-dimension log size kappa(n) = ln(n) / d.
double rate_of(double n, int d);

/// Planted set S = (Y1..Yn), duplicates allowed. Points are stored as block
/// indices; row i occupies indices[i*block_count, (i+1)*block_count).
struct Codebook {
  SupportSpec spec;
  std::size_t n = 0;
  std::vector<std::uint32_t> indices;
  std::uint64_t seed = 0;
  double rate = 0.0;

  std::span<const std::uint32_t> point(std::size_t i) const {
    return {indices.data() + i * static_cast<std::size_t>(spec.block_count),
            static_cast<std::size_t>(spec.block_count)};
  }
  std::vector<double> decode(std::size_t i) const;
  std::uint64_t hash() const;
};

/// Coordinates of a support point given by block indices.
std::vector<double> decode_point(const SupportSpec& spec, std::span<const std::uint32_t> blocks);

/// n i.i.d. uniform draws from V.
Codebook sample_codebook(const SupportSpec& spec, std::size_t n, std::uint64_t seed);

/// Codebook built from explicit block indices (validated).
Codebook make_codebook(const SupportSpec& spec, std::vector<std::uint32_t> indices, std::uint64_t seed = 0);

/// Every point of V exactly once (so nu_S = U). Refuses |V| > max_points.
Codebook enumerate_support(const SupportSpec& spec, std::size_t max_points = 1u << 20);

struct RatePacking {
  std::vector<double> rates;
  std::vector<std::uint64_t> sizes;
  double separation = 0.0;
  std::uint64_t n_min = 1;
  std::uint64_t n_max = 1;
  int d = 0;
};

/// Greedy packing n_{j+1} = ceil(exp(2 d w) n_j), truncated at n_max.
RatePacking pack_rates(int d, std::uint64_t n_min, std::uint64_t n_max, double w);

/// Guaranteed cardinality ln(n_max / (2 n_min)) / (ln 2 + 2 d w); may be <= 0.
double packing_lower_bound(int d, std::uint64_t n_min, std::uint64_t n_max, double w);

nlohmann::json to_json(const SupportSpec& spec);
nlohmann::json to_json(const Codebook& codebook);
/// Inverse of to_json(Codebook); indices are the canonical form.
Codebook codebook_from_json(const nlohmann::json& doc);

}  // namespace scorelab

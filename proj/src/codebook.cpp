#include "scorelab/codebook.hpp"

#include <cmath>
#include <numbers>

#include "scorelab/error.hpp"
#include "scorelab/numeric.hpp"
#include "scorelab/random.hpp"

namespace scorelab {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

void require_even_dimension(int d) {
  if (d < 2 || d % 2 != 0) throw DomainError("even dimension required (got d=" + std::to_string(d) + ")");
}

SupportSpec circle_spec(int d, double R, double gamma, int M) {
  SupportSpec spec;
  spec.kind = SupportKind::product_circle;
  spec.d = d;
  spec.R = R;
  spec.gamma = gamma;
  spec.M = M;
  spec.block_count = d / 2;
  spec.block_dim = 2;
  spec.block_points.resize(2 * static_cast<std::size_t>(M));
  for (int k = 0; k < M; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / M;
    spec.block_points[2 * k] = R * std::cos(angle);
    spec.block_points[2 * k + 1] = R * std::sin(angle);
  }
  return spec;
}

}  // namespace

std::string to_string(SupportKind kind) {
  return kind == SupportKind::hypercube ? "hypercube" : "product-circle";
}

SupportKind parse_support_kind(const std::string& text) {
  if (text == "hypercube") return SupportKind::hypercube;
  if (text == "product-circle" || text == "product_circle") return SupportKind::product_circle;
  throw DomainError("unknown support kind '" + text + "'");
}

double SupportSpec::log_cardinality() const {
  return static_cast<double>(block_count) * std::log(static_cast<double>(M));
}

std::uint64_t SupportSpec::hash() const {
  std::uint64_t h = kFnvOffset;
  const int k = static_cast<int>(kind);
  fnv_bytes(h, &k, sizeof k);
  fnv_bytes(h, &d, sizeof d);
  fnv_bytes(h, &R, sizeof R);
  fnv_bytes(h, &gamma, sizeof gamma);
  fnv_bytes(h, &M, sizeof M);
  return h;
}

SupportSpec build_support(SupportKind kind, int d, double R, double gamma) {
  require_even_dimension(d);
  if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
  if (kind == SupportKind::hypercube) {
    SupportSpec spec;
    spec.kind = kind;
    spec.d = d;
    spec.R = 1.0;
    spec.gamma = gamma;
    spec.M = 2;
    spec.block_count = d;
    spec.block_dim = 1;
    spec.block_points = {-1.0, 1.0};
    return spec;
  }
  if (!(R > 0.0)) throw DomainError("R must be positive");
  if (!(gamma < R / 2.0)) throw DomainError("gamma must satisfy 0 < gamma < R/2");
  return circle_spec(d, R, gamma, static_cast<int>(std::ceil(std::numbers::pi * R / gamma)));
}

SupportSpec build_circle_support_with_points(int d, double R, double gamma, int M) {
  require_even_dimension(d);
  require(R > 0.0 && gamma > 0.0, "R and gamma must be positive");
  require(M >= 1, "need at least one point per block");
  return circle_spec(d, R, gamma, M);
}

double log1p_cardinality(const SupportSpec& spec) { return log1p_exp(spec.log_cardinality()); }

double rate_of(double n, int d) { return std::log(n) / d; }

std::vector<double> decode_point(const SupportSpec& spec, std::span<const std::uint32_t> blocks) {
  std::vector<double> x(static_cast<std::size_t>(spec.d));
  for (int j = 0; j < spec.block_count; ++j) {
    const auto a = spec.block_point(static_cast<int>(blocks[j]));
    for (int c = 0; c < spec.block_dim; ++c) x[static_cast<std::size_t>(j * spec.block_dim + c)] = a[c];
  }
  return x;
}

std::vector<double> Codebook::decode(std::size_t i) const { return decode_point(spec, point(i)); }

std::uint64_t Codebook::hash() const {
  std::uint64_t h = spec.hash();
  fnv_bytes(h, &n, sizeof n);
  fnv_bytes(h, indices.data(), indices.size() * sizeof(std::uint32_t));
  return h;
}

Codebook sample_codebook(const SupportSpec& spec, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DomainError("codebook size n must be >= 1");
  Codebook cb;
  cb.spec = spec;
  cb.n = n;
  cb.seed = seed;
  cb.rate = rate_of(static_cast<double>(n), spec.d);
  cb.indices.resize(n * static_cast<std::size_t>(spec.block_count));
  Rng rng(seed);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(spec.M - 1));
  for (auto& idx : cb.indices) idx = pick(rng);
  return cb;
}

Codebook make_codebook(const SupportSpec& spec, std::vector<std::uint32_t> indices, std::uint64_t seed) {
  const auto bc = static_cast<std::size_t>(spec.block_count);
  require(!indices.empty() && indices.size() % bc == 0, "codebook indices must be a non-empty multiple of block_count");
  for (auto idx : indices) require(idx < static_cast<std::uint32_t>(spec.M), "codebook block index out of range");
  Codebook cb;
  cb.spec = spec;
  cb.n = indices.size() / bc;
  cb.indices = std::move(indices);
  cb.seed = seed;
  cb.rate = rate_of(static_cast<double>(cb.n), spec.d);
  return cb;
}

Codebook enumerate_support(const SupportSpec& spec, std::size_t max_points) {
  require(spec.log_cardinality() <= std::log(static_cast<double>(max_points)) + 1e-9,
          "support too large to enumerate");
  std::size_t total = 1;
  for (int j = 0; j < spec.block_count; ++j) total *= static_cast<std::size_t>(spec.M);
  std::vector<std::uint32_t> indices(total * static_cast<std::size_t>(spec.block_count));
  std::vector<std::uint32_t> digits(static_cast<std::size_t>(spec.block_count), 0);
  for (std::size_t i = 0; i < total; ++i) {
    std::copy(digits.begin(), digits.end(), indices.begin() + static_cast<std::ptrdiff_t>(i * digits.size()));
    for (auto& digit : digits) {  // odometer increment
      if (++digit < static_cast<std::uint32_t>(spec.M)) break;
      digit = 0;
    }
  }
  return make_codebook(spec, std::move(indices));
}

double packing_lower_bound(int d, std::uint64_t n_min, std::uint64_t n_max, double w) {
  return std::log(static_cast<double>(n_max) / (2.0 * static_cast<double>(n_min))) / (kLn2 + 2.0 * d * w);
}

RatePacking pack_rates(int d, std::uint64_t n_min, std::uint64_t n_max, double w) {
  require(d >= 1, "pack_rates: d must be positive");
  require(n_min >= 1 && n_min <= n_max, "pack_rates: need 1 <= n_min <= n_max");
  require(w > 0.0, "pack_rates: separation w must be positive");
  RatePacking out;
  out.separation = w;
  out.n_min = n_min;
  out.n_max = n_max;
  out.d = d;
  const double growth = std::exp(2.0 * d * w);
  double n = static_cast<double>(n_min);
  while (n <= static_cast<double>(n_max)) {
    out.sizes.push_back(static_cast<std::uint64_t>(n));
    out.rates.push_back(rate_of(n, d));
    const double target = growth * n;
    if (!std::isfinite(target) || target > static_cast<double>(n_max)) break;
    double next = std::ceil(target);
    // Products that land within rounding of an integer are that integer.
    const double overshoot = target - (next - 1.0);
    if (overshoot < 1.0 && overshoot <= 1e-12 * target) next -= 1.0;
    n = std::max(next, n + 1.0);
  }
  return out;
}

nlohmann::json to_json(const SupportSpec& spec) {
  return {{"kind", to_string(spec.kind)}, {"d", spec.d}, {"R", spec.R}, {"gamma", spec.gamma}, {"M", spec.M}};
}

nlohmann::json to_json(const Codebook& cb) {
  nlohmann::json doc = to_json(cb.spec);
  doc["n"] = cb.n;
  doc["seed"] = cb.seed;
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < cb.n; ++i) {
    const auto p = cb.point(i);
    rows.push_back(std::vector<std::uint32_t>(p.begin(), p.end()));
  }
  doc["indices"] = std::move(rows);
  return doc;
}

Codebook codebook_from_json(const nlohmann::json& doc) {
  const auto kind = parse_support_kind(doc.at("kind").get<std::string>());
  const int d = doc.at("d").get<int>();
  const double R = doc.at("R").get<double>();
  const double gamma = doc.at("gamma").get<double>();
  const int M = doc.at("M").get<int>();
  SupportSpec spec = kind == SupportKind::hypercube ? build_support(kind, d, R, gamma)
                                                    : build_circle_support_with_points(d, R, gamma, M);
  require(spec.M == M, "codebook JSON: M inconsistent with kind");
  std::vector<std::uint32_t> indices;
  for (const auto& row : doc.at("indices")) {
    require(row.size() == static_cast<std::size_t>(spec.block_count), "codebook JSON: row length != block_count");
    for (const auto& v : row) indices.push_back(v.get<std::uint32_t>());
  }
  require(indices.size() / spec.block_count == doc.at("n").get<std::size_t>(), "codebook JSON: n mismatch");
  return make_codebook(spec, std::move(indices), doc.value("seed", std::uint64_t{0}));
}

}  // namespace scorelab

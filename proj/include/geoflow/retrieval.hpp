#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "geoflow/errors.hpp"
#include "geoflow/rng.hpp"
#include "geoflow/sphere.hpp"

namespace geoflow {

enum class Modality { Vgi, Rsi };

inline std::string to_string(Modality m) {
  return m == Modality::Vgi ? "vgi" : "rsi";
}

inline Modality modality_from_string(const std::string& s) {
  if (s == "vgi") return Modality::Vgi;
  if (s == "rsi") return Modality::Rsi;
  throw ParseError("unknown modality: " + s);
}

struct EmbeddingRecord {
  std::string id;
  GeoCoord geo;
  Modality modality = Modality::Vgi;
  Eigen::VectorXd vec;
};

// Reference set of geo-tagged satellite embeddings. Construction validates
// id uniqueness, modality and dimension consistency.
class Gallery {
 public:
  explicit Gallery(std::vector<EmbeddingRecord> records)
      : records_(std::move(records)) {
    if (records_.empty()) throw DomainError("gallery must be non-empty");
    dim_ = static_cast<int>(records_[0].vec.size());
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (r.modality != Modality::Rsi)
        throw DomainError("gallery record " + r.id + " is not RSI");
      if (r.vec.size() != dim_)
        throw DimensionError("gallery embedding dimension mismatch at " +
                             r.id);
      if (!r.vec.allFinite())
        throw DomainError("gallery embedding not finite at " + r.id);
      if (!by_id_.emplace(r.id, i).second) throw DuplicateIdError(r.id);
    }
  }

  const std::vector<EmbeddingRecord>& records() const { return records_; }
  int dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }

  const EmbeddingRecord& by_id(const std::string& id) const {
    const auto it = by_id_.find(id);
    if (it == by_id_.end()) throw DomainError("unknown gallery id: " + id);
    return records_[it->second];
  }

 private:
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, std::size_t> by_id_;
  int dim_ = 0;
};

// Per-modality affine maps into the shared cross-view space. These stand in
// for the full Siamese encoders; the contrastive objective over them is
// unchanged.
struct ProjectionHeads {
  Eigen::MatrixXd w_vgi;  // proj_dim x d_vgi
  Eigen::VectorXd b_vgi;
  Eigen::MatrixXd w_rsi;  // proj_dim x d_rsi
  Eigen::VectorXd b_rsi;
  double temperature = 0.07;

  int out_dim() const { return static_cast<int>(w_vgi.rows()); }

  static ProjectionHeads make(int d_vgi, int d_rsi, int proj_dim,
                              SeededRng& rng) {
    if (d_vgi < 1 || d_rsi < 1 || proj_dim < 1)
      throw ShapeError("head dimensions must be positive");
    ProjectionHeads h;
    auto init = [&](int rows, int cols) {
      Eigen::MatrixXd w(rows, cols);
      const double lim = 1.0 / std::sqrt(static_cast<double>(cols));
      for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) w(r, c) = uniform_in(rng, -lim, lim);
      return w;
    };
    h.w_vgi = init(proj_dim, d_vgi);
    h.b_vgi = Eigen::VectorXd::Zero(proj_dim);
    h.w_rsi = init(proj_dim, d_rsi);
    h.b_rsi = Eigen::VectorXd::Zero(proj_dim);
    return h;
  }

  static ProjectionHeads identity(int d) {
    ProjectionHeads h;
    h.w_vgi = Eigen::MatrixXd::Identity(d, d);
    h.b_vgi = Eigen::VectorXd::Zero(d);
    h.w_rsi = Eigen::MatrixXd::Identity(d, d);
    h.b_rsi = Eigen::VectorXd::Zero(d);
    return h;
  }

  Eigen::VectorXd project(const Eigen::VectorXd& v, Modality m) const {
    const auto& w = m == Modality::Vgi ? w_vgi : w_rsi;
    const auto& b = m == Modality::Vgi ? b_vgi : b_rsi;
    if (v.size() != w.cols())
      throw DimensionError("embedding dimension does not match head");
    return w * v + b;
  }
};

inline double cosine_similarity(const Eigen::VectorXd& q,
                                const Eigen::VectorXd& x) {
  if (q.size() != x.size())
    throw DimensionError("cosine similarity dimension mismatch");
  const double nq = q.norm();
  const double nx = x.norm();
  if (nq == 0.0 || nx == 0.0) throw ZeroVectorError();
  return q.dot(x) / (nq * nx);
}

// ---------------------------------------------------------------------------
// InfoNCE over in-batch negatives, symmetric across both directions.
// ---------------------------------------------------------------------------

namespace detail {

// rows of X are samples; returns L2-normalized projections, keeping the
// pre-normalization norms for the backward pass
inline Eigen::MatrixXd project_rows(const Eigen::MatrixXd& X,
                                    const Eigen::MatrixXd& w,
                                    const Eigen::VectorXd& b,
                                    Eigen::VectorXd* norms = nullptr) {
  Eigen::MatrixXd P = X * w.transpose();
  P.rowwise() += b.transpose();
  if (norms) norms->resize(P.rows());
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    const double n = P.row(i).norm();
    if (!(n > 1e-300)) throw NonFiniteError("projection collapsed to zero");
    if (norms) (*norms)[i] = n;
    P.row(i) /= n;
  }
  return P;
}

inline Eigen::MatrixXd row_softmax(const Eigen::MatrixXd& L) {
  Eigen::MatrixXd S(L.rows(), L.cols());
  for (Eigen::Index i = 0; i < L.rows(); ++i) {
    const double m = L.row(i).maxCoeff();
    S.row(i) = (L.row(i).array() - m).exp();
    S.row(i) /= S.row(i).sum();
  }
  return S;
}

}  // namespace detail

inline double infonce_loss(const ProjectionHeads& heads,
                           const Eigen::MatrixXd& vgi,
                           const Eigen::MatrixXd& rsi, double tau) {
  const Eigen::Index n = vgi.rows();
  if (n < 2) throw DomainError("infonce needs at least 2 pairs");
  if (rsi.rows() != n) throw ShapeError("pair count mismatch");
  if (!(tau > 0.0)) throw DomainError("temperature must be positive");
  const Eigen::MatrixXd zv =
      detail::project_rows(vgi, heads.w_vgi, heads.b_vgi);
  const Eigen::MatrixXd zr =
      detail::project_rows(rsi, heads.w_rsi, heads.b_rsi);
  const Eigen::MatrixXd logits = (zv * zr.transpose()) / tau;
  const Eigen::MatrixXd pr = detail::row_softmax(logits);
  const Eigen::MatrixXd pc = detail::row_softmax(logits.transpose());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    loss += -std::log(pr(i, i)) - std::log(pc(i, i));
  loss /= static_cast<double>(2 * n);
  if (!std::isfinite(loss)) throw NonFiniteError("infonce loss not finite");
  return loss;
}

struct HeadGradients {
  Eigen::MatrixXd dw_vgi, dw_rsi;
  Eigen::VectorXd db_vgi, db_rsi;
};

inline std::pair<double, HeadGradients> infonce_backward(
    const ProjectionHeads& heads, const Eigen::MatrixXd& vgi,
    const Eigen::MatrixXd& rsi, double tau) {
  const Eigen::Index n = vgi.rows();
  if (n < 2) throw DomainError("infonce needs at least 2 pairs");
  if (rsi.rows() != n) throw ShapeError("pair count mismatch");
  Eigen::VectorXd norm_v, norm_r;
  const Eigen::MatrixXd zv =
      detail::project_rows(vgi, heads.w_vgi, heads.b_vgi, &norm_v);
  const Eigen::MatrixXd zr =
      detail::project_rows(rsi, heads.w_rsi, heads.b_rsi, &norm_r);
  const Eigen::MatrixXd logits = (zv * zr.transpose()) / tau;
  const Eigen::MatrixXd pr = detail::row_softmax(logits);
  const Eigen::MatrixXd pc = detail::row_softmax(logits.transpose());

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    loss += -std::log(pr(i, i)) - std::log(pc(i, i));
  loss /= static_cast<double>(2 * n);
  if (!std::isfinite(loss)) throw NonFiniteError("infonce loss not finite");

  // d(loss)/d(logits) for the symmetric two-direction objective
  Eigen::MatrixXd dlogits = pr + pc.transpose();
  for (Eigen::Index i = 0; i < n; ++i) dlogits(i, i) -= 2.0;
  dlogits /= static_cast<double>(2 * n);

  const Eigen::MatrixXd ds = dlogits / tau;
  Eigen::MatrixXd dzv = ds * zr;
  Eigen::MatrixXd dzr = ds.transpose() * zv;
  // back through L2 normalization
  for (Eigen::Index i = 0; i < n; ++i) {
    dzv.row(i) =
        (dzv.row(i) - dzv.row(i).dot(zv.row(i)) * zv.row(i)) / norm_v[i];
    dzr.row(i) =
        (dzr.row(i) - dzr.row(i).dot(zr.row(i)) * zr.row(i)) / norm_r[i];
  }
  HeadGradients g;
  g.dw_vgi = dzv.transpose() * vgi;
  g.db_vgi = dzv.colwise().sum();
  g.dw_rsi = dzr.transpose() * rsi;
  g.db_rsi = dzr.colwise().sum();
  return {loss, std::move(g)};
}

struct HeadTrainConfig {
  int proj_dim = 128;
  double tau = 0.07;
  double learning_rate = 1e-3;
  int steps = 2000;
  int batch = 64;
  std::uint64_t seed = 0;
};

struct TrainedHeads {
  ProjectionHeads heads;
  std::vector<double> loss_curve;
};

// Adam on the symmetric InfoNCE objective over (vgi, rsi) positive pairs.
inline TrainedHeads train_heads(const Eigen::MatrixXd& vgi,
                                const Eigen::MatrixXd& rsi,
                                const HeadTrainConfig& cfg) {
  const Eigen::Index n = vgi.rows();
  if (n < 2) throw DomainError("need at least 2 pairs to train heads");
  if (rsi.rows() != n) throw ShapeError("pair count mismatch");
  SeededRng rng = substream(cfg.seed, "train-heads");
  TrainedHeads out;
  out.heads = ProjectionHeads::make(static_cast<int>(vgi.cols()),
                                    static_cast<int>(rsi.cols()),
                                    cfg.proj_dim, rng);
  out.heads.temperature = cfg.tau;

  auto zeros_like = [](const Eigen::MatrixXd& m) {
    return Eigen::MatrixXd::Zero(m.rows(), m.cols()).eval();
  };
  Eigen::MatrixXd mwv = zeros_like(out.heads.w_vgi), vwv = mwv;
  Eigen::MatrixXd mwr = zeros_like(out.heads.w_rsi), vwr = mwr;
  Eigen::VectorXd mbv = Eigen::VectorXd::Zero(cfg.proj_dim), vbv = mbv;
  Eigen::VectorXd mbr = Eigen::VectorXd::Zero(cfg.proj_dim), vbr = mbr;

  const int batch = static_cast<int>(
      std::min<Eigen::Index>(n, std::max(2, cfg.batch)));
  Eigen::MatrixXd bv(batch, vgi.cols()), br(batch, rsi.cols());
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int step = 1; step <= cfg.steps; ++step) {
    for (int i = 0; i < batch; ++i) {
      const auto idx = uniform_index(rng, static_cast<std::uint64_t>(n));
      bv.row(i) = vgi.row(static_cast<Eigen::Index>(idx));
      br.row(i) = rsi.row(static_cast<Eigen::Index>(idx));
    }
    const auto [loss, g] = infonce_backward(out.heads, bv, br, cfg.tau);
    const double c1 = 1.0 - std::pow(b1, step);
    const double c2 = 1.0 - std::pow(b2, step);
    auto upd = [&](auto& p, auto& m, auto& v, const auto& grad) {
      m = b1 * m + (1.0 - b1) * grad;
      v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
      p -= cfg.learning_rate *
           ((m / c1).array() / ((v / c2).array().sqrt() + eps)).matrix();
    };
    upd(out.heads.w_vgi, mwv, vwv, g.dw_vgi);
    upd(out.heads.b_vgi, mbv, vbv, g.db_vgi);
    upd(out.heads.w_rsi, mwr, vwr, g.dw_rsi);
    upd(out.heads.b_rsi, mbr, vbr, g.db_rsi);
    if (step % 25 == 0 || step == cfg.steps) out.loss_curve.push_back(loss);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Retrieval and anchor reranking.
// ---------------------------------------------------------------------------

struct Region {
  GeoCoord center;
  double radius_km = 0.0;
};

struct RankedItem {
  std::string id;
  double score = 0.0;
  GeoCoord geo;
};
using RankedList = std::vector<RankedItem>;

namespace detail {
inline void sort_ranked(RankedList& list) {
  std::sort(list.begin(), list.end(),
            [](const RankedItem& a, const RankedItem& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.id < b.id;
            });
}
}  // namespace detail

// Exact scan: optional inclusive radius filter around a center, then cosine
// ranking in the projected space; ties broken by ascending id.
inline RankedList retrieve_topk(const EmbeddingRecord& query,
                                const Gallery& gallery,
                                const ProjectionHeads& heads, int k,
                                const std::optional<Region>& region = {}) {
  if (k < 1) throw DomainError("k must be >= 1");
  if (query.modality != Modality::Vgi)
    throw DomainError("query must be VGI modality");
  const Eigen::VectorXd q = heads.project(query.vec, Modality::Vgi);
  std::optional<UnitVec3> center;
  if (region) center = to_unit_vec(region->center);

  RankedList candidates;
  candidates.reserve(gallery.size());
  for (const auto& rec : gallery.records()) {
    if (center &&
        geodesic_distance_km(*center, to_unit_vec(rec.geo)) >
            region->radius_km)
      continue;
    const double score =
        cosine_similarity(q, heads.project(rec.vec, Modality::Rsi));
    candidates.push_back({rec.id, score, rec.geo});
  }
  if (candidates.empty()) throw EmptyRegionError();
  detail::sort_ranked(candidates);
  if (static_cast<int>(candidates.size()) > k) candidates.resize(k);
  return candidates;
}

// Anchor-based rescoring over the candidates in `base`:
//   R(x) = alpha S(q, x) + (1 - alpha)/k * sum_j S(a_j, x)
// with anchors = the top n_anchors of base.
inline RankedList rerank(const EmbeddingRecord& query, const RankedList& base,
                         const Gallery& gallery, const ProjectionHeads& heads,
                         int n_anchors, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DomainError("alpha must lie in [0, 1]");
  if (base.empty()) throw DomainError("base ranking must be non-empty");
  if (n_anchors < 1 || n_anchors > static_cast<int>(base.size()))
    throw DomainError("n_anchors must lie in [1, |base|]");

  const Eigen::VectorXd q = heads.project(query.vec, Modality::Vgi);
  std::vector<Eigen::VectorXd> anchors;
  anchors.reserve(n_anchors);
  for (int j = 0; j < n_anchors; ++j)
    anchors.push_back(
        heads.project(gallery.by_id(base[j].id).vec, Modality::Rsi));

  RankedList out;
  out.reserve(base.size());
  for (const auto& item : base) {
    const Eigen::VectorXd x =
        heads.project(gallery.by_id(item.id).vec, Modality::Rsi);
    double anchor_sum = 0.0;
    for (const auto& a : anchors) anchor_sum += cosine_similarity(a, x);
    const double score = alpha * cosine_similarity(q, x) +
                         (1.0 - alpha) / n_anchors * anchor_sum;
    out.push_back({item.id, score, item.geo});
  }
  detail::sort_ranked(out);
  return out;
}

// ---------------------------------------------------------------------------
// Heads persistence ("GEOHEAD1", little-endian; see docs/FORMATS.md).
// ---------------------------------------------------------------------------

namespace detail {
constexpr char kHeadMagic[8] = {'G', 'E', 'O', 'H', 'E', 'A', 'D', '1'};

inline void put_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  const auto rows = static_cast<std::uint32_t>(m.rows());
  const auto cols = static_cast<std::uint32_t>(m.cols());
  os.write(reinterpret_cast<const char*>(&rows), 4);
  os.write(reinterpret_cast<const char*>(&cols), 4);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    const Eigen::RowVectorXd row = m.row(r);
    os.write(reinterpret_cast<const char*>(row.data()),
             sizeof(double) * row.size());
  }
}

inline Eigen::MatrixXd get_matrix(std::istream& is) {
  std::uint32_t rows = 0, cols = 0;
  is.read(reinterpret_cast<char*>(&rows), 4);
  is.read(reinterpret_cast<char*>(&cols), 4);
  if (!is) throw ParseError("truncated heads file");
  Eigen::MatrixXd m(rows, cols);
  std::vector<double> row(cols);
  for (std::uint32_t r = 0; r < rows; ++r) {
    is.read(reinterpret_cast<char*>(row.data()), sizeof(double) * cols);
    if (!is) throw ParseError("truncated heads file");
    for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = row[c];
  }
  return m;
}
}  // namespace detail

inline void save_heads(const std::string& path, const ProjectionHeads& h) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open heads file for writing: " + path);
  os.write(detail::kHeadMagic, 8);
  const std::uint32_t version = 1;
  os.write(reinterpret_cast<const char*>(&version), 4);
  os.write(reinterpret_cast<const char*>(&h.temperature), 8);
  detail::put_matrix(os, h.w_vgi);
  detail::put_matrix(os, h.b_vgi);
  detail::put_matrix(os, h.w_rsi);
  detail::put_matrix(os, h.b_rsi);
  if (!os) throw ParseError("write failure: " + path);
}

inline ProjectionHeads load_heads(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open heads file: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kHeadMagic, 8) != 0)
    throw ParseError("not a GEOHEAD1 file: " + path);
  std::uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  if (version != 1) throw ParseError("unsupported heads version");
  ProjectionHeads h;
  is.read(reinterpret_cast<char*>(&h.temperature), 8);
  if (!is) throw ParseError("truncated heads file");
  h.w_vgi = detail::get_matrix(is);
  const Eigen::MatrixXd bv = detail::get_matrix(is);
  h.w_rsi = detail::get_matrix(is);
  const Eigen::MatrixXd br = detail::get_matrix(is);
  if (bv.cols() != 1 || br.cols() != 1)
    throw ParseError("malformed heads bias block");
  h.b_vgi = bv.col(0);
  h.b_rsi = br.col(0);
  return h;
}

}  // namespace geoflow

#include "phifno/fno.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "phifno/binio.hpp"
#include "phifno/errors.hpp"
#include "phifno/poisson.hpp"

namespace phifno::fno {

namespace {

using ad::Shape;
using ad::Tape;
using ad::Tensor;

void validate(const FnoHyperparams& h) {
  if (h.n_d < 1 || h.m < 1 || h.n_q < 1 || h.c_in < 1)
    throw ConfigError("fno: channel, mode and width counts must be at least 1");
  if (h.pad < 0) throw ConfigError("fno: padding must be nonnegative");
}

// Manifest of (name, scalar count) pairs in blob order; doubles as the
// layout builder and the checkpoint header documentation.
std::vector<std::pair<std::string, int64_t>> group_manifest(const FnoHyperparams& h) {
  const int64_t nd = h.n_d, m = h.m, nq = h.n_q, ci = h.c_in;
  std::vector<std::pair<std::string, int64_t>> g;
  g.emplace_back("lift.weight", nd * ci);
  g.emplace_back("lift.bias", nd);
  for (int l = 1; l <= 4; ++l) {
    std::string p = "layer" + std::to_string(l);
    g.emplace_back(p + ".spectral", 2 * nd * nd * m * m);
    g.emplace_back(p + ".mix.weight", nd * nd);
    g.emplace_back(p + ".mix.bias", nd);
  }
  g.emplace_back("proj.hidden.weight", nq * nd);
  g.emplace_back("proj.hidden.bias", nq);
  g.emplace_back("proj.out.weight", nq);
  g.emplace_back("proj.out.bias", 1);
  return g;
}

}  // namespace

ParamLayout layout_of(const FnoHyperparams& h) {
  validate(h);
  auto groups = group_manifest(h);
  ParamLayout lay;
  int64_t at = 0;
  size_t gi = 0;
  auto next = [&]() {
    int64_t here = at;
    at += groups[gi++].second;
    return here;
  };
  lay.wp = next();
  lay.bp = next();
  for (int l = 0; l < 4; ++l) {
    lay.wc[l] = next();
    lay.wb[l] = next();
    lay.bb[l] = next();
  }
  lay.wq1 = next();
  lay.bq1 = next();
  lay.wq2 = next();
  lay.bq2 = next();
  lay.total = at;
  return lay;
}

int64_t param_count(const FnoHyperparams& h) { return layout_of(h).total; }

FnoParams init_params(const FnoHyperparams& h, Rng& rng) {
  ParamLayout lay = layout_of(h);
  FnoParams p;
  p.hyper = h;
  p.stats.in_mean.assign(h.c_in, 0.0);
  p.stats.in_std.assign(h.c_in, 1.0);
  p.blob.assign(lay.total, 0.0);

  auto fill_uniform = [&](int64_t at, int64_t n, double lo, double hi) {
    for (int64_t k = 0; k < n; ++k) p.blob[at + k] = rng.uniform(lo, hi);
  };
  const double nd = h.n_d;
  const double lift_b = 1.0 / std::sqrt(static_cast<double>(h.c_in));
  const double mix_b = 1.0 / std::sqrt(nd);
  const double out_b = 1.0 / std::sqrt(static_cast<double>(h.n_q));
  const double spec_hi = 1.0 / (nd * nd);

  fill_uniform(lay.wp, static_cast<int64_t>(h.n_d) * h.c_in, -lift_b, lift_b);
  fill_uniform(lay.bp, h.n_d, -lift_b, lift_b);
  for (int l = 0; l < 4; ++l) {
    fill_uniform(lay.wc[l], 2LL * h.n_d * h.n_d * h.m * h.m, 0.0, spec_hi);
    fill_uniform(lay.wb[l], static_cast<int64_t>(h.n_d) * h.n_d, -mix_b, mix_b);
    fill_uniform(lay.bb[l], h.n_d, -mix_b, mix_b);
  }
  fill_uniform(lay.wq1, static_cast<int64_t>(h.n_q) * h.n_d, -mix_b, mix_b);
  fill_uniform(lay.bq1, h.n_q, -mix_b, mix_b);
  fill_uniform(lay.wq2, h.n_q, -out_b, out_b);
  fill_uniform(lay.bq2, 1, -out_b, out_b);
  return p;
}

ChannelStats compute_channel_stats(const std::vector<Sample>& train,
                                   const std::vector<mesh::PixelMasks>& masks,
                                   bool predict_u) {
  if (train.empty()) throw ConfigError("channel stats: empty training set");
  if (masks.size() != train.size())
    throw ConfigError("channel stats: one mask per sample required");

  // pooled population moments per channel: f, phi, g, output
  double sum[4] = {0, 0, 0, 0}, sumsq[4] = {0, 0, 0, 0};
  int64_t count = 0;
  for (size_t s = 0; s < train.size(); ++s) {
    const Sample& smp = train[s];
    const auto& mk = masks[s];
    if (mk.nx != smp.f.nx || mk.ny != smp.f.ny)
      throw ConfigError("channel stats: mask grid does not match sample grid");
    FieldGrid out = predict_u ? fem::reconstruct_u(smp.phi, smp.w, smp.g) : smp.w;
    for (int i = 0; i < mk.nx; ++i)
      for (int j = 0; j < mk.ny; ++j) {
        if (!mk.s0[static_cast<size_t>(i) * mk.ny + j]) continue;
        const double v[4] = {smp.f.at(i, j), smp.phi.at(i, j), smp.g.at(i, j),
                             out.at(i, j)};
        for (int c = 0; c < 4; ++c) {
          sum[c] += v[c];
          sumsq[c] += v[c] * v[c];
        }
        ++count;
      }
  }
  if (count == 0) throw ConfigError("channel stats: no active pixels");

  ChannelStats st;
  double mean[4], sd[4];
  for (int c = 0; c < 4; ++c) {
    mean[c] = sum[c] / static_cast<double>(count);
    double var = sumsq[c] / static_cast<double>(count) - mean[c] * mean[c];
    sd[c] = std::sqrt(std::max(var, 0.0));
    if (sd[c] <= 1e-14 * std::max(1.0, std::abs(mean[c])))
      throw NumericalError("channel stats: channel " + std::to_string(c) +
                           " is constant over the active pixels");
  }
  st.in_mean = {mean[0], mean[1], mean[2]};
  st.in_std = {sd[0], sd[1], sd[2]};
  st.out_mean = mean[3];
  st.out_std = sd[3];
  return st;
}

ParamLeaves make_leaves(const FnoParams& p, Tape* tape) {
  ParamLayout lay = layout_of(p.hyper);
  if (static_cast<int64_t>(p.blob.size()) != lay.total)
    throw ConfigError("fno: parameter blob length does not match hyperparams");
  const FnoHyperparams& h = p.hyper;

  auto slice = [&](int64_t at, const Shape& s) {
    std::vector<double> vals(p.blob.begin() + at, p.blob.begin() + at + s.numel());
    return tape ? tape->leaf(s, std::move(vals)) : Tensor::constant(s, std::move(vals));
  };

  ParamLeaves lv;
  lv.wp = slice(lay.wp, Shape::mat(h.n_d, h.c_in));
  lv.bp = slice(lay.bp, Shape::vec(h.n_d));
  for (int l = 0; l < 4; ++l) {
    lv.wc[l] = slice(lay.wc[l], Shape::grid4(h.n_d, h.n_d, h.m, 2 * h.m));
    lv.wb[l] = slice(lay.wb[l], Shape::mat(h.n_d, h.n_d));
    lv.bb[l] = slice(lay.bb[l], Shape::vec(h.n_d));
  }
  lv.wq1 = slice(lay.wq1, Shape::mat(h.n_q, h.n_d));
  lv.bq1 = slice(lay.bq1, Shape::vec(h.n_q));
  lv.wq2 = slice(lay.wq2, Shape::mat(1, h.n_q));
  lv.bq2 = slice(lay.bq2, Shape::vec(1));
  return lv;
}

std::vector<double> gather_grads(Tape& tape, const ParamLeaves& leaves) {
  std::vector<double> flat;
  auto take = [&](const Tensor& t) {
    const auto& g = tape.grad(t);
    flat.insert(flat.end(), g.begin(), g.end());
  };
  take(leaves.wp);
  take(leaves.bp);
  for (int l = 0; l < 4; ++l) {
    take(leaves.wc[l]);
    take(leaves.wb[l]);
    take(leaves.bb[l]);
  }
  take(leaves.wq1);
  take(leaves.bq1);
  take(leaves.wq2);
  take(leaves.bq2);
  return flat;
}

Tensor standardize(const Tensor& x, const ChannelStats& stats) {
  const int c = x.shape().d[1];
  if (x.shape().rank != 4 || static_cast<int>(stats.in_mean.size()) != c ||
      static_cast<int>(stats.in_std.size()) != c)
    throw ConfigError("standardize: stats do not match the channel count");
  std::vector<double> sc(c), sh(c);
  for (int k = 0; k < c; ++k) {
    sc[k] = 1.0 / stats.in_std[k];
    sh[k] = -stats.in_mean[k] / stats.in_std[k];
  }
  return channel_affine(x, sc, sh);
}

Tensor unstandardize(const Tensor& y, const ChannelStats& stats) {
  if (y.shape().rank != 4 || y.shape().d[1] != 1)
    throw ConfigError("unstandardize: expects the single output channel");
  return channel_affine(y, {stats.out_std}, {stats.out_mean});
}

Tensor fourier_layer(const Tensor& x, const Tensor& wc, const Tensor& wb,
                     const Tensor& bb, int m) {
  return gelu(add(spectral_conv(x, wc, m), pointwise_affine(x, wb, bb)));
}

Tensor fno_forward(const FnoHyperparams& h, const ChannelStats& stats,
                   const ParamLeaves& leaves, const Tensor& x) {
  validate(h);
  if (x.shape().rank != 4 || x.shape().d[1] != h.c_in)
    throw ConfigError("fno: input stack must be [b, c_in, x, y]");
  if (static_cast<int>(stats.in_mean.size()) != h.c_in ||
      static_cast<int>(stats.in_std.size()) != h.c_in)
    throw ConfigError("fno: channel stats do not match c_in");

  Tensor y = standardize(x, stats);
  y = pointwise_affine(y, leaves.wp, leaves.bp);
  if (h.pad_per_layer) {
    for (int l = 0; l < 4; ++l)
      y = crop(fourier_layer(reflection_pad(y, h.pad), leaves.wc[l], leaves.wb[l],
                             leaves.bb[l], h.m),
               h.pad);
  } else {
    y = reflection_pad(y, h.pad);
    for (int l = 0; l < 4; ++l)
      y = fourier_layer(y, leaves.wc[l], leaves.wb[l], leaves.bb[l], h.m);
    y = crop(y, h.pad);
  }
  y = pointwise_affine(y, leaves.wq1, leaves.bq1);
  y = gelu(y);
  y = pointwise_affine(y, leaves.wq2, leaves.bq2);
  return unstandardize(y, stats);
}

FieldGrid fno_forward(const FnoParams& p, const FieldGrid& f_h,
                      const FieldGrid& phi_h, const FieldGrid& g_h) {
  if (p.hyper.c_in != 3)
    throw ConfigError("fno: the grid convenience entry expects c_in = 3");
  if (!f_h.same_shape(phi_h) || !f_h.same_shape(g_h))
    throw ConfigError("fno: input grids must share one shape");
  const int nx = f_h.nx, ny = f_h.ny;
  std::vector<double> stacked;
  stacked.reserve(3 * f_h.v.size());
  stacked.insert(stacked.end(), f_h.v.begin(), f_h.v.end());
  stacked.insert(stacked.end(), phi_h.v.begin(), phi_h.v.end());
  stacked.insert(stacked.end(), g_h.v.begin(), g_h.v.end());

  ParamLeaves leaves = make_leaves(p, nullptr);
  Tensor out = fno_forward(p.hyper, p.stats, leaves,
                           Tensor::constant(Shape::grid4(1, 3, nx, ny), std::move(stacked)));
  FieldGrid res(nx, ny);
  res.v = out.values();
  return res;
}

std::vector<double> stack_inputs(const std::vector<const Sample*>& batch) {
  if (batch.empty()) throw ConfigError("fno: empty batch");
  const FieldGrid& ref = batch.front()->f;
  std::vector<double> stacked;
  stacked.reserve(batch.size() * 3 * ref.v.size());
  for (const Sample* s : batch) {
    if (!s->f.same_shape(ref) || !s->phi.same_shape(ref) || !s->g.same_shape(ref))
      throw ConfigError("fno: batch samples must share one grid shape");
    stacked.insert(stacked.end(), s->f.v.begin(), s->f.v.end());
    stacked.insert(stacked.end(), s->phi.v.begin(), s->phi.v.end());
    stacked.insert(stacked.end(), s->g.v.begin(), s->g.v.end());
  }
  return stacked;
}

namespace {

constexpr int kCheckpointFormat = 1;

}  // namespace

void save_checkpoint(const FnoParams& p, const std::string& path) {
  ParamLayout lay = layout_of(p.hyper);
  if (static_cast<int64_t>(p.blob.size()) != lay.total)
    throw ConfigError("checkpoint: blob length does not match hyperparams");

  nlohmann::json head;
  head["format"] = kCheckpointFormat;
  head["hyperparams"] = {{"n_d", p.hyper.n_d},       {"m", p.hyper.m},
                         {"n_q", p.hyper.n_q},       {"c_in", p.hyper.c_in},
                         {"pad", p.hyper.pad},       {"pad_per_layer", p.hyper.pad_per_layer},
                         {"predict_u", p.hyper.predict_u}};
  head["channel_stats"] = {{"in_mean", p.stats.in_mean},
                           {"in_std", p.stats.in_std},
                           {"out_mean", p.stats.out_mean},
                           {"out_std", p.stats.out_std}};
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& [name, count] : group_manifest(p.hyper))
    manifest.push_back({{"name", name}, {"count", count}});
  head["parameter_order"] = manifest;
  head["param_count"] = lay.total;
  head["scalar"] = "f64le";
  head["spectral_layout"] = "[in][out][kx][ky] complex, real then imaginary";

  std::vector<unsigned char> blob;
  blob.reserve(p.blob.size() * 8);
  for (double v : p.blob) binio::append_f64le(blob, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("checkpoint: cannot open " + path + " for writing");
  std::string header = head.dump();
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.put('\n');
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size()));
  if (!out) throw IoError("checkpoint: short write to " + path);
}

FnoParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("checkpoint: cannot open " + path);
  std::string header;
  if (!std::getline(in, header)) throw IoError("checkpoint: missing header line");

  nlohmann::json head;
  try {
    head = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: bad header: ") + e.what());
  }

  FnoParams p;
  try {
    if (head.at("format").get<int>() != kCheckpointFormat)
      throw IoError("checkpoint: unsupported format version");
    const auto& h = head.at("hyperparams");
    p.hyper.n_d = h.at("n_d").get<int>();
    p.hyper.m = h.at("m").get<int>();
    p.hyper.n_q = h.at("n_q").get<int>();
    p.hyper.c_in = h.at("c_in").get<int>();
    p.hyper.pad = h.at("pad").get<int>();
    p.hyper.pad_per_layer = h.at("pad_per_layer").get<bool>();
    p.hyper.predict_u = h.at("predict_u").get<bool>();
    const auto& st = head.at("channel_stats");
    p.stats.in_mean = st.at("in_mean").get<std::vector<double>>();
    p.stats.in_std = st.at("in_std").get<std::vector<double>>();
    p.stats.out_mean = st.at("out_mean").get<double>();
    p.stats.out_std = st.at("out_std").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("checkpoint: header field: ") + e.what());
  }

  int64_t total;
  try {
    total = param_count(p.hyper);
  } catch (const ConfigError& e) {
    throw IoError(std::string("checkpoint: invalid hyperparams: ") + e.what());
  }
  if (head.value("param_count", int64_t{-1}) != total)
    throw IoError("checkpoint: declared param_count disagrees with hyperparams");
  if (static_cast<int>(p.stats.in_mean.size()) != p.hyper.c_in ||
      static_cast<int>(p.stats.in_std.size()) != p.hyper.c_in)
    throw IoError("checkpoint: channel stats length does not match c_in");

  std::vector<unsigned char> raw(static_cast<size_t>(total) * 8);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (in.gcount() != static_cast<std::streamsize>(raw.size()))
    throw IoError("checkpoint: parameter blob truncated");
  if (in.peek() != std::ifstream::traits_type::eof())
    throw IoError("checkpoint: trailing bytes after parameter blob");

  p.blob.resize(total);
  for (int64_t k = 0; k < total; ++k)
    p.blob[k] = binio::read_f64le(raw.data() + static_cast<size_t>(k) * 8);
  return p;
}

}  // namespace phifno::fno

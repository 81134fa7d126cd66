#include "endoscan/mosaic.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>

namespace endoscan {

void RegistrationParams::validate() const {
  if (!(template_px > 0 && template_px < working_diameter_px)) {
    throw ConfigError("registration needs 0 < template size < working diameter");
  }
}

namespace {

struct Tap {
  int index;
  float weight;
};

// For each output sample, the input samples it averages and their weights.
std::vector<std::vector<Tap>> area_weights(int in_px, int out_px) {
  std::vector<std::vector<Tap>> taps(out_px);
  const double f = static_cast<double>(in_px) / out_px;
  for (int j = 0; j < out_px; ++j) {
    const double a = j * f;
    const double b = (j + 1) * f;
    for (int i = static_cast<int>(std::floor(a)); i < static_cast<int>(std::ceil(b)) && i < in_px; ++i) {
      const double overlap = std::min<double>(b, i + 1) - std::max<double>(a, i);
      if (overlap > 0.0) {
        taps[j].push_back({i, static_cast<float>(overlap / f)});
      }
    }
  }
  return taps;
}

std::mutex &planner_mutex() {
  static std::mutex m;
  return m;
}

} // namespace

Image resize_area(const Image &src, int out_px) {
  if (src.width() != src.height()) {
    throw Error("resize_area expects a square image");
  }
  if (out_px <= 0) {
    throw Error("resize_area needs a positive output size");
  }
  const int n = src.width();
  if (n == out_px) {
    return src;
  }
  const auto taps = area_weights(n, out_px);
  Image rows(out_px, n);
  for (int y = 0; y < n; ++y) {
    const auto in = src.row(y);
    auto out = rows.row(y);
    for (int j = 0; j < out_px; ++j) {
      float acc = 0.0f;
      for (const auto &t : taps[j]) {
        acc += t.weight * in[t.index];
      }
      out[j] = acc;
    }
  }
  Image dst(out_px, out_px);
  for (int j = 0; j < out_px; ++j) {
    auto out = dst.row(j);
    for (const auto &t : taps[j]) {
      const auto in = rows.row(t.index);
      for (int x = 0; x < out_px; ++x) {
        out[x] += t.weight * in[x];
      }
    }
  }
  return dst;
}

DiscResizer::DiscResizer(int in_px, int out_px) : in_px_(in_px), out_px_(out_px) {
  Image mask(in_px, in_px);
  const double h = 0.5 * in_px;
  for (int y = 0; y < in_px; ++y) {
    for (int x = 0; x < in_px; ++x) {
      const double dx = x + 0.5 - h;
      const double dy = y + 0.5 - h;
      mask.at(x, y) = dx * dx + dy * dy <= h * h ? 1.0f : 0.0f;
    }
  }
  const Image cov = resize_area(mask, out_px);
  inv_coverage_.resize(cov.size());
  for (std::size_t i = 0; i < cov.size(); ++i) {
    inv_coverage_[i] = cov.data()[i] > 1e-6f ? 1.0f / cov.data()[i] : 0.0f;
  }
}

Image DiscResizer::operator()(const Image &src) const {
  if (src.width() != in_px_ || src.height() != in_px_) {
    throw Error("frame size does not match the resizer");
  }
  Image out = resize_area(src, out_px_);
  auto px = out.data();
  for (std::size_t i = 0; i < px.size(); ++i) {
    px[i] = std::min(1.0f, px[i] * inv_coverage_[i]);
  }
  return out;
}

struct NccRegistrar::Impl {
  int d = 0;
  int t = 0;
  bool has_ref = false;
  bool degenerate = false;
  // Zero-mean template.
  std::vector<double> tmpl;

  // Inscribed field disc of the next image (1 inside). Only pixels inside it
  // take part in a placement's statistics.
  std::vector<double> mask;
  // Column span [row_lo, row_hi) of the mask on each row.
  std::vector<int> row_lo, row_hi;
  // Per placement: valid pixel count, and sum of template and template^2 over them.
  std::vector<double> nvalid, tsum, tsum2;

  // FFT route.
  double *real_buf = nullptr;
  fftw_complex *spec_buf = nullptr;
  fftw_complex *tmpl_spec = nullptr;
  fftw_complex *mask_spec = nullptr;
  fftw_complex *img_spec = nullptr;
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;

  // Scratch reused across matches.
  std::vector<double> numer, wsum, wsum2, s1, s2, scores, prefix1, prefix2;

  int places() const { return d - t + 1; }

  Impl(int d_, int t_, bool use_fft) : d(d_), t(t_) {
    tmpl.resize(static_cast<std::size_t>(t) * t);
    mask.resize(static_cast<std::size_t>(d) * d);
    const double h = 0.5 * d;
    for (int y = 0; y < d; ++y) {
      for (int x = 0; x < d; ++x) {
        const double dx = x + 0.5 - h;
        const double dy = y + 0.5 - h;
        mask[static_cast<std::size_t>(y) * d + x] = dx * dx + dy * dy <= h * h ? 1.0 : 0.0;
      }
    }
    row_lo.resize(d);
    row_hi.resize(d);
    for (int y = 0; y < d; ++y) {
      const double *r = mask.data() + static_cast<std::size_t>(y) * d;
      int lo = 0;
      while (lo < d && r[lo] == 0.0) {
        ++lo;
      }
      int hi = lo;
      while (hi < d && r[hi] != 0.0) {
        ++hi;
      }
      row_lo[y] = lo;
      row_hi[y] = hi;
    }
    const int p = places();
    nvalid.resize(static_cast<std::size_t>(p) * p);
    tsum.resize(nvalid.size());
    tsum2.resize(nvalid.size());
    const int w1 = d + 1;
    std::vector<double> sat(static_cast<std::size_t>(w1) * w1, 0.0);
    for (int y = 0; y < d; ++y) {
      double r = 0.0;
      for (int x = 0; x < d; ++x) {
        r += mask[static_cast<std::size_t>(y) * d + x];
        sat[static_cast<std::size_t>(y + 1) * w1 + x + 1] = sat[static_cast<std::size_t>(y) * w1 + x + 1] + r;
      }
    }
    const auto at = [&](int x, int y) { return sat[static_cast<std::size_t>(y) * w1 + x]; };
    for (int py = 0; py < p; ++py) {
      for (int px = 0; px < p; ++px) {
        nvalid[static_cast<std::size_t>(py) * p + px] =
            at(px + t, py + t) - at(px, py + t) - at(px + t, py) + at(px, py);
      }
    }
    if (!use_fft) {
      return;
    }
    const std::size_t half = static_cast<std::size_t>(d) * (d / 2 + 1);
    real_buf = fftw_alloc_real(static_cast<std::size_t>(d) * d);
    spec_buf = fftw_alloc_complex(half);
    tmpl_spec = fftw_alloc_complex(half);
    mask_spec = fftw_alloc_complex(half);
    img_spec = fftw_alloc_complex(half);
    {
      std::lock_guard lock(planner_mutex());
      // ESTIMATE keeps plan selection, and therefore rounding, reproducible.
      forward = fftw_plan_dft_r2c_2d(d, d, real_buf, spec_buf, FFTW_ESTIMATE);
      inverse = fftw_plan_dft_c2r_2d(d, d, spec_buf, real_buf, FFTW_ESTIMATE);
    }
    std::copy(mask.begin(), mask.end(), real_buf);
    fftw_execute_dft_r2c(forward, real_buf, mask_spec);
  }

  // Sums of the template and its square over the masked part of each placement.
  // Rows of the disc mask are contiguous, so each row is a difference of prefix sums.
  void template_window_sums() {
    const int p = places();
    const double n = static_cast<double>(t) * t;
    const int w = t + 1;
    prefix1.assign(static_cast<std::size_t>(t) * w, 0.0);
    prefix2.assign(prefix1.size(), 0.0);
    for (int y = 0; y < t; ++y) {
      for (int x = 0; x < t; ++x) {
        const double v = tmpl[static_cast<std::size_t>(y) * t + x];
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        prefix1[i + 1] = prefix1[i] + v;
        prefix2[i + 1] = prefix2[i] + v * v;
      }
    }
    double full1 = 0.0;
    double full2 = 0.0;
    for (int y = 0; y < t; ++y) {
      full1 += prefix1[static_cast<std::size_t>(y) * w + t];
      full2 += prefix2[static_cast<std::size_t>(y) * w + t];
    }
    for (int py = 0; py < p; ++py) {
      for (int px = 0; px < p; ++px) {
        const std::size_t i = static_cast<std::size_t>(py) * p + px;
        if (nvalid[i] == n) {
          tsum[i] = full1;
          tsum2[i] = full2;
          continue;
        }
        double a1 = 0.0;
        double a2 = 0.0;
        if (nvalid[i] >= 0.5 * n) {
          for (int y = 0; y < t; ++y) {
            const int xs = std::clamp(row_lo[py + y] - px, 0, t);
            const int xe = std::clamp(row_hi[py + y] - px, 0, t);
            if (xe > xs) {
              const std::size_t r = static_cast<std::size_t>(y) * w;
              a1 += prefix1[r + xe] - prefix1[r + xs];
              a2 += prefix2[r + xe] - prefix2[r + xs];
            }
          }
        }
        tsum[i] = a1;
        tsum2[i] = a2;
      }
    }
  }

  // out[p] = sum_x a(p + x) b(x) over the template window, from spectra A and B.
  void correlate(const fftw_complex *a, const fftw_complex *b, std::vector<double> &out) {
    const std::size_t half = static_cast<std::size_t>(d) * (d / 2 + 1);
    for (std::size_t i = 0; i < half; ++i) {
      // a * conj(b)
      spec_buf[i][0] = a[i][0] * b[i][0] + a[i][1] * b[i][1];
      spec_buf[i][1] = a[i][1] * b[i][0] - a[i][0] * b[i][1];
    }
    fftw_execute_dft_c2r(inverse, spec_buf, real_buf);
    const double scale = 1.0 / (static_cast<double>(d) * d);
    const int p = places();
    out.resize(static_cast<std::size_t>(p) * p);
    for (int py = 0; py < p; ++py) {
      for (int px = 0; px < p; ++px) {
        out[static_cast<std::size_t>(py) * p + px] = real_buf[static_cast<std::size_t>(py) * d + px] * scale;
      }
    }
  }
  ~Impl() {
    std::lock_guard lock(planner_mutex());
    if (forward) {
      fftw_destroy_plan(forward);
    }
    if (inverse) {
      fftw_destroy_plan(inverse);
    }
    fftw_free(real_buf);
    fftw_free(spec_buf);
    fftw_free(tmpl_spec);
    fftw_free(mask_spec);
    fftw_free(img_spec);
  }
  Impl(const Impl &) = delete;
  Impl &operator=(const Impl &) = delete;
};

NccRegistrar::NccRegistrar(RegistrationParams params, NccMethod method)
    : params_(params), method_(method) {
  params_.validate();
  impl_ = std::make_unique<Impl>(params_.working_diameter_px, params_.template_px, method_ == NccMethod::Fft);
}

NccRegistrar::~NccRegistrar() = default;
NccRegistrar::NccRegistrar(NccRegistrar &&) noexcept = default;
NccRegistrar &NccRegistrar::operator=(NccRegistrar &&) noexcept = default;

bool NccRegistrar::has_reference() const { return impl_->has_ref; }
bool NccRegistrar::reference_degenerate() const { return impl_->degenerate; }

void NccRegistrar::set_reference(const Image &working) {
  auto &m = *impl_;
  if (working.width() != m.d || working.height() != m.d) {
    throw Error("reference image must be at the working diameter");
  }
  const int o = params_.template_origin();
  double sum = 0.0;
  for (int y = 0; y < m.t; ++y) {
    for (int x = 0; x < m.t; ++x) {
      const double v = working.at(o + x, o + y);
      m.tmpl[static_cast<std::size_t>(y) * m.t + x] = v;
      sum += v;
    }
  }
  const double mean = sum / static_cast<double>(m.tmpl.size());
  double norm2 = 0.0;
  for (auto &v : m.tmpl) {
    v -= mean;
    norm2 += v * v;
  }
  m.has_ref = true;
  // Standard deviation below 1e-6 intensity units counts as featureless.
  m.degenerate = norm2 <= 1e-12 * static_cast<double>(m.tmpl.size());
  if (m.degenerate) {
    return;
  }
  if (method_ != NccMethod::Fft) {
    m.template_window_sums();
    return;
  }
  auto load_template = [&](bool squared) {
    std::fill(m.real_buf, m.real_buf + static_cast<std::size_t>(m.d) * m.d, 0.0);
    for (int y = 0; y < m.t; ++y) {
      for (int x = 0; x < m.t; ++x) {
        const double v = m.tmpl[static_cast<std::size_t>(y) * m.t + x];
        m.real_buf[static_cast<std::size_t>(y) * m.d + x] = squared ? v * v : v;
      }
    }
  };
  load_template(true);
  fftw_execute_dft_r2c(m.forward, m.real_buf, m.tmpl_spec);
  m.correlate(m.mask_spec, m.tmpl_spec, m.tsum2);
  load_template(false);
  fftw_execute_dft_r2c(m.forward, m.real_buf, m.tmpl_spec);
  m.correlate(m.mask_spec, m.tmpl_spec, m.tsum);
}

namespace {

// Argmax over the placement grid with the documented tie-break. Placement
// (px, py) is the shift (o - px, o - py).
RegistrationResult pick_peak(const std::vector<double> &score, int places, int o) {
  double best = -2.0;
  for (const double v : score) {
    best = std::max(best, v);
  }
  long chosen = -1;
  long b2 = 0;
  Shift bs;
  for (int py = 0; py < places; ++py) {
    for (int px = 0; px < places; ++px) {
      const std::size_t i = static_cast<std::size_t>(py) * places + px;
      if (score[i] < best - 1e-9) {
        continue;
      }
      const Shift c{o - px, o - py};
      const long r2 = static_cast<long>(c.dx) * c.dx + static_cast<long>(c.dy) * c.dy;
      if (chosen < 0 || r2 < b2 || (r2 == b2 && (c.dy < bs.dy || (c.dy == bs.dy && c.dx < bs.dx)))) {
        chosen = static_cast<long>(i);
        b2 = r2;
        bs = c;
      }
    }
  }
  return {bs, score[static_cast<std::size_t>(chosen)]};
}

} // namespace

RegistrationResult NccRegistrar::match(const Image &working) const {
  auto &m = *impl_;
  if (!m.has_ref) {
    throw RegistrationError("no reference frame set");
  }
  if (m.degenerate) {
    throw RegistrationError("degenerate registration: template has zero variance");
  }
  if (working.width() != m.d || working.height() != m.d) {
    throw Error("registration image must be at the working diameter");
  }
  const int d = m.d;
  const int t = m.t;
  const int places = d - t + 1;
  const int o = params_.template_origin();
  const double n = static_cast<double>(t) * t;

  auto &numer = m.numer;
  auto &wsum = m.wsum;
  auto &wsum2 = m.wsum2;
  numer.resize(static_cast<std::size_t>(places) * places);
  wsum.resize(numer.size());
  wsum2.resize(numer.size());

  if (method_ == NccMethod::Fft) {
    auto data = working.data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      m.real_buf[i] = data[i] * m.mask[i];
    }
    fftw_execute_dft_r2c(m.forward, m.real_buf, m.img_spec);
    m.correlate(m.img_spec, m.tmpl_spec, numer);
    // Window sums from summed-area tables.
    const int w1 = d + 1;
    auto &s1 = m.s1;
    auto &s2 = m.s2;
    s1.assign(static_cast<std::size_t>(w1) * w1, 0.0);
    s2.assign(s1.size(), 0.0);
    for (int y = 0; y < d; ++y) {
      double r1 = 0.0;
      double r2 = 0.0;
      const auto row = working.row(y);
      const double *up1 = s1.data() + static_cast<std::size_t>(y) * w1 + 1;
      const double *up2 = s2.data() + static_cast<std::size_t>(y) * w1 + 1;
      double *out1 = s1.data() + static_cast<std::size_t>(y + 1) * w1 + 1;
      double *out2 = s2.data() + static_cast<std::size_t>(y + 1) * w1 + 1;
      const double *mrow = m.mask.data() + static_cast<std::size_t>(y) * d;
      for (int x = 0; x < d; ++x) {
        const double v = row[x] * mrow[x];
        r1 += v;
        r2 += v * v;
        out1[x] = up1[x] + r1;
        out2[x] = up2[x] + r2;
      }
    }
    auto box = [&](const std::vector<double> &s, int x, int y) {
      const auto at = [&](int xx, int yy) { return s[static_cast<std::size_t>(yy) * w1 + xx]; };
      return at(x + t, y + t) - at(x, y + t) - at(x + t, y) + at(x, y);
    };
    for (int py = 0; py < places; ++py) {
      for (int px = 0; px < places; ++px) {
        wsum[static_cast<std::size_t>(py) * places + px] = box(s1, px, py);
        wsum2[static_cast<std::size_t>(py) * places + px] = box(s2, px, py);
      }
    }
  } else {
    for (int py = 0; py < places; ++py) {
      for (int px = 0; px < places; ++px) {
        double acc = 0.0;
        double a1 = 0.0;
        double a2 = 0.0;
        for (int y = 0; y < t; ++y) {
          const auto row = working.row(py + y);
          const double *mr = m.mask.data() + static_cast<std::size_t>(py + y) * d + px;
          const double *tr = m.tmpl.data() + static_cast<std::size_t>(y) * t;
          for (int x = 0; x < t; ++x) {
            const double v = row[px + x] * mr[x];
            acc += tr[x] * v;
            a1 += v;
            a2 += v * v;
          }
        }
        const std::size_t i = static_cast<std::size_t>(py) * places + px;
        numer[i] = acc;
        wsum[i] = a1;
        wsum2[i] = a2;
      }
    }
  }

  auto &scores = m.scores;
  scores.resize(numer.size());
  for (int py = 0; py < places; ++py) {
    for (int px = 0; px < places; ++px) {
      const std::size_t i = static_cast<std::size_t>(py) * places + px;
      const double nv = m.nvalid[i];
      double score = 0.0;
      // Placements with less than half the template inside the field are skipped.
      if (nv >= 0.5 * n) {
        const double var_i = wsum2[i] - wsum[i] * wsum[i] / nv;
        const double var_t = m.tsum2[i] - m.tsum[i] * m.tsum[i] / nv;
        if (var_i > 1e-12 * nv && var_t > 1e-12 * nv) {
          score = (numer[i] - wsum[i] * m.tsum[i] / nv) / std::sqrt(var_i * var_t);
        }
      }
      scores[i] = score;
    }
  }
  const RegistrationResult r = pick_peak(scores, places, o);
  if (!(r.peak > 0.0)) {
    throw RegistrationError("degenerate registration: no positive correlation");
  }
  return r;
}

RegistrationResult register_frames(const Image &prev, const Image &next, const RegistrationParams &params,
                                   NccMethod method) {
  if (prev.width() != next.width() || prev.height() != next.height()) {
    throw Error("register_frames needs frames of equal size");
  }
  const int d = params.working_diameter_px;
  NccRegistrar reg(params, method);
  if (prev.width() == d) {
    reg.set_reference(prev);
    return reg.match(next);
  }
  const DiscResizer resize(prev.width(), d);
  reg.set_reference(resize(prev));
  return reg.match(resize(next));
}

PositionEstimate integrate(PositionEstimate est, const RegistrationResult &r) {
  est.x_px += r.shift.dx;
  est.y_px += r.shift.dy;
  return est;
}

} // namespace endoscan

#include "vsrt/data.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vsrt/errors.hpp"

namespace vsrt {

namespace {

constexpr double kTwoPi = 6.283185307179586;

struct Wave {
    double ux, uy;   // unit direction
    double freq;     // 2*pi/lambda
    double phase;
    double amp[3];
};

struct Blob {
    double cx, cy, inv2s2;
    double amp[3];
};

// Continuous, band-limited test pattern. Amplitude budgets keep values inside
// [0.05, 0.95] and curvatures low enough that bilinear warping stays under
// the 0.02 MAE consistency budget.
struct Pattern {
    std::string kind;
    double base[3] = {0.5, 0.5, 0.5};
    std::vector<Blob> blobs;
    std::vector<Wave> waves;
    double checker_freq = 0.0, checker_cos = 1.0, checker_sin = 0.0;
    double checker_px = 0.0, checker_py = 0.0, checker_beta = 2.0, checker_norm = 1.0;
    double checker_amp[3] = {0, 0, 0};

    static Pattern make(const std::string& kind, std::uint64_t seed, int h, int w) {
        Pattern p;
        p.kind = kind;
        Rng rng(seed);
        if (kind == "gaussian-blobs") {
            for (int c = 0; c < 3; ++c) p.base[c] = rng.uniform(0.15, 0.35);
            const int n = 4 + int(rng.uniform_int(3));
            const double budget = 0.55 / n;
            for (int i = 0; i < n; ++i) {
                Blob b;
                b.cx = rng.uniform(0.15, 0.85) * w;
                b.cy = rng.uniform(0.15, 0.85) * h;
                const double sigma = rng.uniform(2.5, 5.0);
                b.inv2s2 = 1.0 / (2.0 * sigma * sigma);
                for (int c = 0; c < 3; ++c) b.amp[c] = budget * rng.uniform(0.3, 1.0);
                p.blobs.push_back(b);
            }
        } else if (kind == "stripes") {
            for (int c = 0; c < 3; ++c) p.base[c] = rng.uniform(0.42, 0.58);
            Wave wv;
            const double theta = rng.uniform(0.0, kTwoPi);
            wv.ux = std::cos(theta);
            wv.uy = std::sin(theta);
            wv.freq = kTwoPi / rng.uniform(9.0, 14.0);
            wv.phase = rng.uniform(0.0, kTwoPi);
            for (int c = 0; c < 3; ++c) wv.amp[c] = rng.uniform(0.15, 0.30);
            p.waves.push_back(wv);
        } else if (kind == "checker") {
            for (int c = 0; c < 3; ++c) p.base[c] = rng.uniform(0.42, 0.58);
            const double theta = rng.uniform(0.0, kTwoPi);
            p.checker_cos = std::cos(theta);
            p.checker_sin = std::sin(theta);
            p.checker_freq = kTwoPi / rng.uniform(10.0, 16.0);
            p.checker_px = rng.uniform(0.0, kTwoPi);
            p.checker_py = rng.uniform(0.0, kTwoPi);
            p.checker_beta = 2.0;
            p.checker_norm = 1.0 / std::tanh(p.checker_beta);
            for (int c = 0; c < 3; ++c) p.checker_amp[c] = rng.uniform(0.15, 0.30);
        } else if (kind == "band-limited-noise") {
            for (int c = 0; c < 3; ++c) p.base[c] = rng.uniform(0.40, 0.60);
            for (int m = 0; m < 8; ++m) {
                Wave wv;
                const double theta = rng.uniform(0.0, kTwoPi);
                wv.ux = std::cos(theta);
                wv.uy = std::sin(theta);
                wv.freq = kTwoPi / rng.uniform(9.0, 18.0);
                wv.phase = rng.uniform(0.0, kTwoPi);
                for (int c = 0; c < 3; ++c) wv.amp[c] = (0.30 / 8.0) * rng.uniform(0.5, 1.0);
                p.waves.push_back(wv);
            }
        } else {
            throw ConfigError("unknown pattern kind: " + kind);
        }
        return p;
    }

    void value(double x, double y, double out[3]) const {
        out[0] = base[0];
        out[1] = base[1];
        out[2] = base[2];
        for (const auto& b : blobs) {
            const double dx = x - b.cx, dy = y - b.cy;
            const double g = std::exp(-(dx * dx + dy * dy) * b.inv2s2);
            for (int c = 0; c < 3; ++c) out[c] += b.amp[c] * g;
        }
        for (const auto& wv : waves) {
            const double s = std::sin((x * wv.ux + y * wv.uy) * wv.freq + wv.phase);
            for (int c = 0; c < 3; ++c) out[c] += wv.amp[c] * s;
        }
        if (checker_freq > 0.0) {
            const double xr = x * checker_cos + y * checker_sin;
            const double yr = -x * checker_sin + y * checker_cos;
            const double s = std::tanh(checker_beta * std::sin(xr * checker_freq + checker_px) *
                                       std::sin(yr * checker_freq + checker_py)) *
                             checker_norm;
            for (int c = 0; c < 3; ++c) out[c] += checker_amp[c] * s;
        }
    }
};

double cubic_cr(double s) {
    s = std::abs(s);
    if (s <= 1.0) return (1.5 * s - 2.5) * s * s + 1.0;
    if (s < 2.0) return -0.5 * (((s - 5.0) * s + 8.0) * s - 4.0);
    return 0.0;
}

// One separable pass along the last axis; rows = all leading extents.
std::vector<float> resample_axis(const float* src, std::size_t rows, std::size_t n, std::size_t no,
                                 double factor) {
    std::vector<float> out(rows * no);
    std::vector<std::array<double, 4>> wts(no);
    std::vector<std::array<long, 4>> idx(no);
    for (std::size_t o = 0; o < no; ++o) {
        const double s = (double(o) + 0.5) / factor - 0.5;
        const long k0 = long(std::floor(s)) - 1;
        for (int k = 0; k < 4; ++k) {
            long i = k0 + k;
            wts[o][k] = cubic_cr(s - double(i));
            if (i < 0) i = 0;
            if (i > long(n) - 1) i = long(n) - 1;
            idx[o][k] = i;
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        const float* row = src + r * n;
        float* orow = out.data() + r * no;
        for (std::size_t o = 0; o < no; ++o) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += wts[o][k] * double(row[idx[o][k]]);
            orow[o] = float(acc);
        }
    }
    return out;
}

std::vector<float> transpose_rows(const std::vector<float>& v, std::size_t rows, std::size_t h,
                                  std::size_t w) {
    std::vector<float> out(v.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const float* src = v.data() + r * h * w;
        float* dst = out.data() + r * h * w;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) dst[x * h + y] = src[y * w + x];
    }
    return out;
}

} // namespace

Tensor bicubic_resample(const Tensor& img, double factor) {
    if (img.ndim() != 3 && img.ndim() != 4) {
        throw ShapeError("bicubic_resample expects [C,H,W] or [T,C,H,W]");
    }
    const bool ok = factor == 0.25 || factor == 0.5 || factor == 1.0 || factor == 2.0 || factor == 4.0;
    if (!ok) throw ShapeError("bicubic_resample: factor must be one of 1/4, 1/2, 1, 2, 4");
    if (factor == 1.0) return img.clone();
    const std::size_t planes = img.ndim() == 4 ? img.dim(0) * img.dim(1) : img.dim(0);
    const std::size_t h = img.dim(img.ndim() - 2), w = img.dim(img.ndim() - 1);
    const double oh_d = double(h) * factor, ow_d = double(w) * factor;
    const std::size_t oh = std::size_t(oh_d), ow = std::size_t(ow_d);
    if (double(oh) != oh_d || double(ow) != ow_d || oh == 0 || ow == 0) {
        throw ShapeError("bicubic_resample: extents not divisible at this factor");
    }
    // along W, then along H (via transpose)
    std::vector<float> a = resample_axis(img.data(), planes * h, w, ow, factor);
    std::vector<float> at = transpose_rows(a, planes, h, ow);
    std::vector<float> b = resample_axis(at.data(), planes * ow, h, oh, factor);
    std::vector<float> bt = transpose_rows(b, planes, ow, oh);
    Shape od = img.dims();
    od[od.size() - 2] = oh;
    od[od.size() - 1] = ow;
    return Tensor::from(od, std::move(bt));
}

SamplePair generate_sequence(const MotionSpec& spec, int frames, int hr_h, int hr_w, int scale) {
    if (frames < 1 || hr_h % scale != 0 || hr_w % scale != 0) {
        throw ShapeError("generate_sequence: HR extents must divide by the scale");
    }
    if (std::abs(spec.dx) > 4.0f || std::abs(spec.dy) > 4.0f) {
        throw ConfigError("generate_sequence: |dx|,|dy| must be <= 4");
    }
    Pattern pat = Pattern::make(spec.kind, spec.seed, hr_h, hr_w);
    SamplePair p;
    p.motion = spec;
    p.scale = scale;
    p.hr = Tensor(Shape{std::size_t(frames), 3, std::size_t(hr_h), std::size_t(hr_w)});
    double rgb[3];
    for (int t = 0; t < frames; ++t) {
        for (int y = 0; y < hr_h; ++y) {
            for (int x = 0; x < hr_w; ++x) {
                pat.value(double(x) - double(t) * spec.dx, double(y) - double(t) * spec.dy, rgb);
                for (int c = 0; c < 3; ++c) {
                    p.hr.data()[((std::size_t(t) * 3 + c) * hr_h + y) * hr_w + x] = float(rgb[c]);
                }
            }
        }
    }
    p.lr = bicubic_resample(p.hr, 1.0 / double(scale));
    GroundTruthFlow est(spec.dx / float(scale), spec.dy / float(scale));
    p.gt_flow = estimate_bidirectional(p.lr, est);
    p.has_gt_flow = true;
    return p;
}

namespace {

Tensor flip_tensor_x(const Tensor& t) {
    Tensor out(t.dims());
    const std::size_t w = t.dim(t.ndim() - 1);
    const std::size_t rows = t.size() / w;
    for (std::size_t r = 0; r < rows; ++r) {
        const float* src = t.data() + r * w;
        float* dst = out.data() + r * w;
        for (std::size_t x = 0; x < w; ++x) dst[x] = src[w - 1 - x];
    }
    return out;
}

// out(x, y) = in(y, n-1-x); vectors rotate (vx,vy) -> (-vy,vx)
Tensor rot90_tensor(const Tensor& t) {
    const std::size_t h = t.dim(t.ndim() - 2), w = t.dim(t.ndim() - 1);
    if (h != w) throw ShapeError("rot90: frames must be square, got " + shape_str(t.dims()));
    Tensor out(t.dims());
    const std::size_t planes = t.size() / (h * w);
    for (std::size_t p = 0; p < planes; ++p) {
        const float* src = t.data() + p * h * w;
        float* dst = out.data() + p * h * w;
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) dst[y * w + x] = src[(w - 1 - x) * w + y];
    }
    return out;
}

FlowPair remap_flows_hflip(const FlowPair& f) {
    FlowPair out{flip_tensor_x(f.backward), flip_tensor_x(f.forward)};
    for (Tensor* t : {&out.backward, &out.forward}) {
        const std::size_t t_n = t->dim(0), plane = t->dim(2) * t->dim(3);
        for (std::size_t ti = 0; ti < t_n; ++ti) {
            float* fx = t->data() + ti * 2 * plane;
            for (std::size_t i = 0; i < plane; ++i) fx[i] = -fx[i];
        }
    }
    return out;
}

FlowPair remap_flows_rot90(const FlowPair& f) {
    FlowPair out{rot90_tensor(f.backward), rot90_tensor(f.forward)};
    for (Tensor* t : {&out.backward, &out.forward}) {
        const std::size_t t_n = t->dim(0), plane = t->dim(2) * t->dim(3);
        for (std::size_t ti = 0; ti < t_n; ++ti) {
            float* fx = t->data() + ti * 2 * plane;
            float* fy = fx + plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const float vx = fx[i], vy = fy[i];
                fx[i] = -vy;
                fy[i] = vx;
            }
        }
    }
    return out;
}

} // namespace

SamplePair hflip(const SamplePair& p) {
    SamplePair out = p;
    out.hr = flip_tensor_x(p.hr);
    out.lr = flip_tensor_x(p.lr);
    if (p.has_gt_flow) out.gt_flow = remap_flows_hflip(p.gt_flow);
    out.motion.dx = -p.motion.dx;
    return out;
}

SamplePair rot90(const SamplePair& p) {
    SamplePair out = p;
    out.hr = rot90_tensor(p.hr);
    out.lr = rot90_tensor(p.lr);
    if (p.has_gt_flow) out.gt_flow = remap_flows_rot90(p.gt_flow);
    out.motion.dx = -p.motion.dy;
    out.motion.dy = p.motion.dx;
    return out;
}

SamplePair augment(const SamplePair& p, Rng& rng) {
    const bool flip = rng.coin();
    const int rots = int(rng.uniform_int(4));
    SamplePair out = p;
    if (flip) out = hflip(out);
    if (out.lr.dim(2) == out.lr.dim(3)) {
        for (int i = 0; i < rots; ++i) out = rot90(out);
    }
    return out;
}

namespace {

Tensor crop_tensor(const Tensor& t, int x0, int y0, int cw, int ch) {
    const std::size_t h = t.dim(t.ndim() - 2), w = t.dim(t.ndim() - 1);
    if (x0 < 0 || y0 < 0 || std::size_t(x0 + cw) > w || std::size_t(y0 + ch) > h) {
        throw ShapeError("crop outside the frame");
    }
    Shape od = t.dims();
    od[od.size() - 2] = ch;
    od[od.size() - 1] = cw;
    Tensor out(od);
    const std::size_t planes = t.size() / (h * w);
    for (std::size_t p = 0; p < planes; ++p) {
        for (int y = 0; y < ch; ++y) {
            const float* src = t.data() + (p * h + y0 + y) * w + x0;
            std::copy(src, src + cw, out.data() + (p * std::size_t(ch) + y) * cw);
        }
    }
    return out;
}

} // namespace

SamplePair crop_lr_patches(const SamplePair& p, int size, int x0, int y0) {
    if (size <= 0 || std::size_t(size) > p.lr.dim(2) || std::size_t(size) > p.lr.dim(3)) {
        throw ShapeError("crop size " + std::to_string(size) + " exceeds LR frame " +
                         shape_str(p.lr.dims()));
    }
    SamplePair out = p;
    out.lr = crop_tensor(p.lr, x0, y0, size, size);
    out.hr = crop_tensor(p.hr, x0 * p.scale, y0 * p.scale, size * p.scale, size * p.scale);
    if (p.has_gt_flow) {
        out.gt_flow.backward = crop_tensor(p.gt_flow.backward, x0, y0, size, size);
        out.gt_flow.forward = crop_tensor(p.gt_flow.forward, x0, y0, size, size);
    }
    return out;
}

SamplePair crop_lr_patches_random(const SamplePair& p, int size, Rng& rng) {
    const int maxx = int(p.lr.dim(3)) - size;
    const int maxy = int(p.lr.dim(2)) - size;
    if (maxx < 0 || maxy < 0) {
        throw ShapeError("crop size " + std::to_string(size) + " exceeds LR frame " +
                         shape_str(p.lr.dims()));
    }
    const int x0 = maxx == 0 ? 0 : int(rng.uniform_int(std::uint64_t(maxx) + 1));
    const int y0 = maxy == 0 ? 0 : int(rng.uniform_int(std::uint64_t(maxy) + 1));
    return crop_lr_patches(p, size, x0, y0);
}

Tensor read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open PPM: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    auto fail = [&](const std::string& what) {
        throw ParseError("PPM parse error in " + path + " at byte " + std::to_string(pos) + ": " + what);
    };
    auto skip_space = [&]() {
        while (pos < bytes.size()) {
            const char ch = bytes[pos];
            if (ch == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
                ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() {
        skip_space();
        if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') fail("expected integer");
        long v = 0;
        while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
            v = v * 10 + (bytes[pos] - '0');
            ++pos;
        }
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') fail("not a P6 file");
    pos = 2;
    const long w = read_int();
    const long h = read_int();
    const long maxval = read_int();
    if (w <= 0 || h <= 0) fail("bad dimensions");
    if (maxval != 255) fail("maxval must be 255");
    if (pos >= bytes.size()) fail("missing raster separator");
    ++pos; // single whitespace byte after maxval
    const std::size_t need = std::size_t(w) * std::size_t(h) * 3;
    if (bytes.size() - pos != need) {
        throw ParseError("PPM payload truncated in " + path + ": expected " + std::to_string(need) +
                         " bytes, got " + std::to_string(bytes.size() - pos));
    }
    Tensor out(Shape{3, std::size_t(h), std::size_t(w)});
    for (long y = 0; y < h; ++y) {
        for (long x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const unsigned char b = (unsigned char)bytes[pos + (std::size_t(y) * w + x) * 3 + c];
                out.data()[(std::size_t(c) * h + y) * w + x] = float(b) / 255.0f;
            }
        }
    }
    return out;
}

void write_ppm(const Tensor& frame, const std::string& path) {
    if (frame.ndim() != 3 || frame.dim(0) != 3) {
        throw ShapeError("write_ppm expects [3,H,W], got " + shape_str(frame.dims()));
    }
    const std::size_t h = frame.dim(1), w = frame.dim(2);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write PPM: " + path);
    out << "P6\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> row(w * 3);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = frame.data()[(std::size_t(c) * h + y) * w + x];
                const long q = std::lround(double(v) * 255.0);
                row[x * 3 + c] = (unsigned char)std::min(255L, std::max(0L, q));
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
    }
}

Dataset generate_dataset(const DataConfig& cfg) {
    cfg.validate();
    std::vector<std::string> kinds;
    {
        std::stringstream ss(cfg.kinds);
        std::string k;
        while (std::getline(ss, k, ',')) {
            if (!k.empty()) kinds.push_back(k);
        }
    }
    Dataset ds;
    ds.config = cfg;
    Rng master(cfg.seed);
    for (int i = 0; i < cfg.sequences; ++i) {
        Rng r = master.child(std::uint64_t(i));
        MotionSpec spec;
        spec.kind = kinds[std::size_t(i) % kinds.size()];
        spec.seed = r.next_u64();
        const float mx = float(r.uniform(cfg.motion_min, cfg.motion_max));
        const float my = float(r.uniform(cfg.motion_min, cfg.motion_max));
        spec.dx = r.coin() ? mx : -mx;
        spec.dy = r.coin() ? my : -my;
        ds.sequences.push_back(
            generate_sequence(spec, cfg.frames, cfg.hr_size, cfg.hr_size, cfg.scale));
    }
    return ds;
}

namespace {

std::string fmt_float(float v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", double(v));
    return buf;
}

} // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream m(dir + "/manifest.txt");
    if (!m) throw IoError("cannot write dataset manifest in " + dir);
    m << "format = " << ds.config.format << "\n";
    m << "sequences = " << ds.sequences.size() << "\n";
    m << "frames = " << ds.config.frames << "\n";
    m << "hr_size = " << ds.config.hr_size << "\n";
    m << "scale = " << ds.config.scale << "\n";
    m << "seed = " << ds.config.seed << "\n";
    m << "kinds = " << ds.config.kinds << "\n";
    m << "motion_min = " << fmt_float(ds.config.motion_min) << "\n";
    m << "motion_max = " << fmt_float(ds.config.motion_max) << "\n";
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
        const auto& s = ds.sequences[i];
        m << "seq " << i << " kind " << s.motion.kind << " seed " << s.motion.seed << " dx "
          << fmt_float(s.motion.dx) << " dy " << fmt_float(s.motion.dy) << "\n";
    }
    for (std::size_t i = 0; i < ds.sequences.size(); ++i) {
        const auto& s = ds.sequences[i];
        if (ds.config.format == "vsrt") {
            save_vsrt(s.hr, dir + "/seq" + std::to_string(i) + "_hr.vsrt");
            save_vsrt(s.lr, dir + "/seq" + std::to_string(i) + "_lr.vsrt");
        } else {
            const int t_n = int(s.hr.dim(0));
            for (int t = 0; t < t_n; ++t) {
                Tensor hr_t = ops::slice_frame(s.hr, t);
                Tensor lr_t = ops::slice_frame(s.lr, t);
                write_ppm(hr_t, dir + "/seq" + std::to_string(i) + "_t" + std::to_string(t) + "_hr.ppm");
                write_ppm(lr_t, dir + "/seq" + std::to_string(i) + "_t" + std::to_string(t) + "_lr.ppm");
            }
        }
    }
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream m(dir + "/manifest.txt");
    if (!m) throw IoError("missing dataset manifest: " + dir + "/manifest.txt");
    ConfigMap cm;
    struct SeqLine {
        std::size_t index;
        MotionSpec spec;
    };
    std::vector<SeqLine> seqs;
    std::string line;
    while (std::getline(m, line)) {
        if (line.empty()) continue;
        if (line.rfind("seq ", 0) == 0) {
            std::stringstream ss(line);
            std::string tag, kw;
            SeqLine sl;
            ss >> tag >> sl.index;
            while (ss >> kw) {
                if (kw == "kind") {
                    ss >> sl.spec.kind;
                } else if (kw == "seed") {
                    ss >> sl.spec.seed;
                } else if (kw == "dx") {
                    ss >> sl.spec.dx;
                } else if (kw == "dy") {
                    ss >> sl.spec.dy;
                } else {
                    throw ParseError("dataset manifest: unknown sequence field " + kw);
                }
            }
            seqs.push_back(sl);
        } else {
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError("dataset manifest: expected key = value");
            std::string key = line.substr(0, eq);
            std::string val = line.substr(eq + 1);
            const auto strip = [](std::string s) {
                const auto a = s.find_first_not_of(" \t");
                const auto b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            cm.set(strip(key), strip(val));
        }
    }
    Dataset ds;
    ds.config = DataConfig::from_map(cm);
    for (const auto& sl : seqs) {
        SamplePair p;
        p.motion = sl.spec;
        p.scale = ds.config.scale;
        if (ds.config.format == "vsrt") {
            p.hr = load_vsrt(dir + "/seq" + std::to_string(sl.index) + "_hr.vsrt");
            p.lr = load_vsrt(dir + "/seq" + std::to_string(sl.index) + "_lr.vsrt");
        } else {
            std::vector<Tensor> hr_frames, lr_frames;
            for (int t = 0; t < ds.config.frames; ++t) {
                hr_frames.push_back(read_ppm(dir + "/seq" + std::to_string(sl.index) + "_t" +
                                             std::to_string(t) + "_hr.ppm"));
                lr_frames.push_back(read_ppm(dir + "/seq" + std::to_string(sl.index) + "_t" +
                                             std::to_string(t) + "_lr.ppm"));
            }
            p.hr = ops::stack_frames(hr_frames);
            p.lr = ops::stack_frames(lr_frames);
        }
        GroundTruthFlow est(p.motion.dx / float(p.scale), p.motion.dy / float(p.scale));
        p.gt_flow = estimate_bidirectional(p.lr, est);
        p.has_gt_flow = true;
        ds.sequences.push_back(std::move(p));
    }
    return ds;
}

} // namespace vsrt

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "dcn/analysis.hpp"
#include "dcn/csv.hpp"
#include "dcn/gradcheck.hpp"
#include "dcn/oracle.hpp"
#include "dcn/tensor_file.hpp"
#include "dcn/train.hpp"

namespace {

using namespace dcn;

constexpr double kEquivTol = 1e-12;

int resolved_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void apply_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

// Collects the resolved parameters of one run and lands them as a key=value
// file next to the main output. duration_s is the only timing field anywhere
// outside the bench CSV, so all other outputs stay byte-identical per seed.
class Manifest {
 public:
  explicit Manifest(const std::string& command)
      : start_(std::chrono::steady_clock::now()) {
    add("command", command);
    add("threads", static_cast<std::int64_t>(resolved_threads()));
  }

  void add(const std::string& key, const std::string& value) {
    entries_.emplace_back(key, value);
  }
  void add(const std::string& key, const char* value) {
    entries_.emplace_back(key, std::string(value));
  }
  void add(const std::string& key, std::int64_t value) {
    entries_.emplace_back(key, std::to_string(value));
  }
  void add(const std::string& key, std::uint64_t value) {
    entries_.emplace_back(key, std::to_string(value));
  }
  void add(const std::string& key, double value) {
    entries_.emplace_back(key, format_double(value));
  }

  void finish(const std::string& out_path) {
    const std::chrono::duration<double> secs =
        std::chrono::steady_clock::now() - start_;
    add("out", out_path);
    add("duration_s", secs.count());
    write_manifest(out_path + ".manifest", entries_);
  }

 private:
  std::chrono::steady_clock::time_point start_;
  std::vector<std::pair<std::string, std::string>> entries_;
};

std::vector<int> parse_int_list(const std::string& s, std::size_t want,
                                const char* what) {
  std::vector<int> out;
  std::string field;
  for (char ch : s) {
    if (ch == ',') {
      out.push_back(parse_int_field(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  out.push_back(parse_int_field(field));
  if (out.size() != want)
    throw std::runtime_error(std::string(what) + " needs " +
                             std::to_string(want) + " comma-separated values");
  return out;
}

struct GradcheckArgs {
  std::string op;
  std::uint64_t seed = 12345;
  int cases = 200;
  double eps = 1e-6;
  double tol = 1e-5;
  double kink_margin = 1e-3;
  std::string out = "gradcheck_report.csv";
};

int run_gradcheck(const GradcheckArgs& a) {
  Manifest manifest("gradcheck");
  manifest.add("op", a.op);
  manifest.add("seed", a.seed);
  manifest.add("cases", static_cast<std::int64_t>(a.cases));
  manifest.add("eps", a.eps);
  manifest.add("tol", a.tol);
  manifest.add("kink_margin", a.kink_margin);

  oracle::FiniteDiffConfig cfg;
  cfg.h = a.eps;
  cfg.tol = a.tol;
  cfg.kink_margin = a.kink_margin;
  const GradCheckReport report = gradcheck_run(a.op, a.cases, a.seed, cfg);

  std::vector<std::string> header{"case"};
  header.insert(header.end(), report.gradient_names.begin(),
                report.gradient_names.end());
  std::vector<std::vector<std::string>> rows;
  rows.reserve(report.rows.size());
  for (const GradCheckRow& r : report.rows) {
    std::vector<std::string> row{std::to_string(r.case_index)};
    for (double e : r.max_rel_err) row.push_back(format_double(e));
    rows.push_back(std::move(row));
  }
  write_csv(a.out, header, rows);
  manifest.finish(a.out);

  std::cout << "gradcheck " << a.op << ": " << (a.cases - report.failures) << "/"
            << a.cases << " cases passed, worst rel err "
            << format_double(report.worst) << "\n";
  return report.failures == 0 ? 0 : 1;
}

struct EquivArgs {
  std::string mode;
  int dilation = 4;
  std::uint64_t seed = 12345;
  int cases = 100;
  std::string out = "equiv_report.csv";
};

double zero_offset_conv_dev(std::mt19937_64& rng) {
  ConvSpec spec;
  spec.kernel_h = spec.kernel_w = 1 + static_cast<int>(rng() % 3);
  spec.stride_y = spec.stride_x = 1 + static_cast<int>(rng() % 2);
  spec.pad_y = spec.pad_x = static_cast<int>(rng() % 2);
  spec.dilation = 1 + static_cast<int>(rng() % 2);
  const int ci = 1 + static_cast<int>(rng() % 3);
  const int co = 1 + static_cast<int>(rng() % 3);
  const int h = 7 + static_cast<int>(rng() % 6);
  const int w = 7 + static_cast<int>(rng() % 6);
  const Tensor4 x = fill_random(1 + static_cast<int>(rng() % 2), ci, h, w,
                                rng(), -1.0, 1.0);
  const ConvWeights wt = random_weights(co, ci, spec, rng());
  const OffsetField zero = OffsetField::zero_for(spec, x.n(), h, w);
  return max_abs_diff(deform_conv2d(x, wt, zero, spec), conv2d(x, wt, spec));
}

Roi random_roi(std::mt19937_64& rng, int batches) {
  Roi roi;
  roi.batch = static_cast<int>(rng() % static_cast<std::uint64_t>(batches));
  roi.p0 = Point2{static_cast<double>(rng() % 4), static_cast<double>(rng() % 4)};
  roi.w = 2.0 + static_cast<double>(rng() % 5) + 0.25 * static_cast<double>(rng() % 3);
  roi.h = 2.0 + static_cast<double>(rng() % 5) + 0.25 * static_cast<double>(rng() % 3);
  return roi;
}

double zero_offset_roi_dev(std::mt19937_64& rng) {
  const int c = 1 + static_cast<int>(rng() % 3);
  const int k = 1 + static_cast<int>(rng() % 3);
  const Tensor4 x = fill_random(2, c, 10, 10, rng(), -1.0, 1.0);
  const Roi roi = random_roi(rng, 2);
  return max_abs_diff(deform_roi_pool(x, roi, k, zero_bin_offsets(k)),
                      roi_pool(x, roi, k));
}

double zero_offset_ps_roi_dev(std::mt19937_64& rng) {
  const int k = 1 + static_cast<int>(rng() % 3);
  const int n_cls = 1 + static_cast<int>(rng() % 2);
  const int cls = static_cast<int>(rng() % static_cast<std::uint64_t>(n_cls));
  const Tensor4 scores = fill_random(1, n_cls * k * k, 10, 10, rng(), -1.0, 1.0);
  const Tensor4 fields = zeros(1, 2 * k * k, 10, 10);
  const Roi roi = random_roi(rng, 1);
  const auto [pooled, offsets] = deform_ps_roi_pool(scores, fields, roi, k, cls, 0.1);
  (void)offsets;
  return max_abs_diff(pooled, ps_roi_pool(scores, roi, k, cls));
}

double atrous_dev(std::mt19937_64& rng, int d) {
  ConvSpec deform_spec;  // 3x3, dilation 1, same padding
  deform_spec.pad_y = deform_spec.pad_x = 1;
  ConvSpec dilated = deform_spec;
  dilated.dilation = d;
  dilated.pad_y = dilated.pad_x = d;

  const int ci = 1 + static_cast<int>(rng() % 2);
  const int co = 1 + static_cast<int>(rng() % 2);
  const int h = 9 + static_cast<int>(rng() % 5);
  const int w = 9 + static_cast<int>(rng() % 5);
  const Tensor4 x = fill_random(1, ci, h, w, rng(), -1.0, 1.0);
  const ConvWeights wt = random_weights(co, ci, deform_spec, rng());

  // Constant offsets (d-1) * p_n stretch the unit grid onto the dilated one.
  OffsetField off = OffsetField::zero_for(deform_spec, 1, h, w);
  const std::vector<Point2> grid = sampling_grid(deform_spec);
  for (int t = 0; t < deform_spec.taps(); ++t) {
    for (int oy = 0; oy < off.data.h(); ++oy) {
      for (int ox = 0; ox < off.data.w(); ++ox) {
        off.data.at(0, 2 * t, oy, ox) = (d - 1) * grid[static_cast<std::size_t>(t)].y;
        off.data.at(0, 2 * t + 1, oy, ox) = (d - 1) * grid[static_cast<std::size_t>(t)].x;
      }
    }
  }
  return max_abs_diff(deform_conv2d(x, wt, off, deform_spec),
                      conv2d(x, wt, dilated));
}

int run_equiv(const EquivArgs& a) {
  Manifest manifest("equiv");
  manifest.add("mode", a.mode);
  manifest.add("seed", a.seed);
  manifest.add("cases", static_cast<std::int64_t>(a.cases));
  if (a.mode == "atrous") {
    if (a.dilation != 2 && a.dilation != 4 && a.dilation != 6 && a.dilation != 8) {
      std::cerr << "equiv: --dilation must be one of 2, 4, 6, 8\n";
      return 2;
    }
    manifest.add("dilation", static_cast<std::int64_t>(a.dilation));
  }

  std::mt19937_64 rng(a.seed);
  std::vector<std::vector<std::string>> rows;
  double worst = 0.0;
  for (int i = 0; i < a.cases; ++i) {
    if (a.mode == "zero-offset") {
      const double dc = zero_offset_conv_dev(rng);
      const double dr = zero_offset_roi_dev(rng);
      const double dp = zero_offset_ps_roi_dev(rng);
      rows.push_back({std::to_string(i), "deform-conv", format_double(dc)});
      rows.push_back({std::to_string(i), "deform-roi", format_double(dr)});
      rows.push_back({std::to_string(i), "deform-ps-roi", format_double(dp)});
      worst = std::max({worst, dc, dr, dp});
    } else {
      const double dev = atrous_dev(rng, a.dilation);
      rows.push_back({std::to_string(i),
                      "atrous-d" + std::to_string(a.dilation),
                      format_double(dev)});
      worst = std::max(worst, dev);
    }
  }
  write_csv(a.out, {"case", "op", "max_abs_dev"}, rows);
  manifest.finish(a.out);

  std::cout << "equiv " << a.mode << ": worst abs deviation "
            << format_double(worst) << " over " << a.cases << " cases\n";
  return worst < kEquivTol ? 0 : 1;
}

struct TrainShiftArgs {
  double dx = 1.5;
  double dy = -0.5;
  int iters = 600;
  double lr = 0.5;
  double beta = 1.0;
  std::uint64_t seed = 7;
  std::string out = "train_shift.csv";
};

int run_train_shift(const TrainShiftArgs& a) {
  if (std::abs(a.dx) > 3.0 || std::abs(a.dy) > 3.0) {
    std::cerr << "train-shift: |dx| and |dy| must be at most 3\n";
    return 2;
  }
  Manifest manifest("train-shift");
  manifest.add("dx", a.dx);
  manifest.add("dy", a.dy);
  manifest.add("iters", static_cast<std::int64_t>(a.iters));
  manifest.add("lr", a.lr);
  manifest.add("beta", a.beta);
  manifest.add("seed", a.seed);

  LayerConfig cfg;
  cfg.lr = a.lr;
  cfg.offset_lr_mult = a.beta;
  cfg.total_iters = a.iters;
  const ShiftRecoveryResult res =
      train_shift_recovery(Point2{a.dx, a.dy}, a.iters, cfg, a.seed);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(res.history.size());
  for (const ShiftIterRow& r : res.history)
    rows.push_back({std::to_string(r.iteration), format_double(r.loss),
                    format_double(r.mean_offset.x),
                    format_double(r.mean_offset.y)});
  write_csv(a.out, {"iteration", "loss", "mean_offset_x", "mean_offset_y"}, rows);
  manifest.finish(a.out);

  const double err = std::hypot(res.learned.x - a.dx, res.learned.y - a.dy);
  std::cout << "train-shift: final mean offset (" << format_double(res.learned.x)
            << ", " << format_double(res.learned.y) << "), target (" << a.dx
            << ", " << a.dy << "), abs error " << format_double(err)
            << (res.diverged ? ", DIVERGED" : "") << "\n";
  return res.diverged ? 1 : 0;
}

struct TraceArgs {
  int layers = 3;
  int kernel = 3;
  int dilation = 1;
  std::string size = "15,15";
  std::string offsets = "zero";
  std::string unit = "7,7";
  std::string out = "trace.csv";
};

int run_trace(const TraceArgs& a) {
  if (a.layers < 1 || a.kernel < 1 || a.dilation < 1) {
    std::cerr << "trace: --layers, --kernel and --dilation must be >= 1\n";
    return 2;
  }
  const std::vector<int> hw = parse_int_list(a.size, 2, "--size");
  const std::vector<int> yx = parse_int_list(a.unit, 2, "--unit");
  if (yx[0] < 0 || yx[0] >= hw[0] || yx[1] < 0 || yx[1] >= hw[1]) {
    std::cerr << "trace: --unit must lie inside the " << hw[0] << "x" << hw[1]
              << " map\n";
    return 2;
  }

  ConvSpec spec;
  spec.kernel_h = spec.kernel_w = a.kernel;
  spec.dilation = a.dilation;
  spec.pad_y = spec.pad_x = a.dilation * (a.kernel - 1) / 2;

  std::vector<TraceLayer> layers;
  if (a.offsets == "zero") {
    layers.assign(static_cast<std::size_t>(a.layers), TraceLayer{spec, OffsetField{}});
  } else {
    // One batch slice per layer, ordered from the traced layer down.
    const Tensor4 stacked = load_tensor(a.offsets);
    if (stacked.n() != a.layers || stacked.c() != 2 * spec.taps() ||
        stacked.h() != hw[0] || stacked.w() != hw[1]) {
      std::cerr << "trace: offsets file must be (" << a.layers << ", "
                << 2 * spec.taps() << ", " << hw[0] << ", " << hw[1] << ")\n";
      return 2;
    }
    for (int l = 0; l < a.layers; ++l) {
      Tensor4 field(1, stacked.c(), stacked.h(), stacked.w());
      for (int c = 0; c < stacked.c(); ++c)
        for (int y = 0; y < stacked.h(); ++y)
          for (int x = 0; x < stacked.w(); ++x)
            field.at(0, c, y, x) = stacked.at(l, c, y, x);
      layers.push_back(TraceLayer{spec, OffsetField{std::move(field)}});
    }
  }

  Manifest manifest("trace");
  manifest.add("layers", static_cast<std::int64_t>(a.layers));
  manifest.add("kernel", static_cast<std::int64_t>(a.kernel));
  manifest.add("dilation", static_cast<std::int64_t>(a.dilation));
  manifest.add("size", a.size);
  manifest.add("offsets", a.offsets);
  manifest.add("unit", a.unit);

  const SampleTrace trace = trace_sampling(layers, yx[0], yx[1]);
  std::vector<std::vector<std::string>> rows;
  rows.reserve(trace.points.size());
  for (const Point2& p : trace.points)
    rows.push_back({std::to_string(trace.depth), format_double(p.y),
                    format_double(p.x)});
  write_csv(a.out, {"depth", "y", "x"}, rows);
  manifest.finish(a.out);

  std::cout << "trace: " << trace.points.size() << " points, "
            << count_distinct(trace.points) << " distinct\n";
  return 0;
}

struct StatsArgs {
  std::string offsets;
  int kernel = 3;
  int stride = 1;
  int pad = 1;
  int dilation = 1;
  std::string boxes;
  std::string out = "stats.csv";
};

int run_stats(const StatsArgs& a) {
  if (a.kernel < 2) {
    std::cerr << "stats: effective dilation needs --kernel >= 2\n";
    return 2;
  }
  ConvSpec spec;
  spec.kernel_h = spec.kernel_w = a.kernel;
  spec.stride_y = spec.stride_x = a.stride;
  spec.pad_y = spec.pad_x = a.pad;
  spec.dilation = a.dilation;

  const Tensor4 field_data = load_tensor(a.offsets);
  if (field_data.c() != 2 * spec.taps()) {
    std::cerr << "stats: offsets file must have " << 2 * spec.taps()
              << " channels for a " << a.kernel << "x" << a.kernel << " kernel\n";
    return 2;
  }
  const OffsetField field{field_data};

  std::map<int, std::vector<Box>> boxes_by_batch;
  if (!a.boxes.empty()) {
    for (const Roi& r : read_rois(a.boxes))
      boxes_by_batch[r.batch].push_back(
          Box{r.p0.x, r.p0.y, r.p0.x + r.w, r.p0.y + r.h});
  }

  Manifest manifest("stats");
  manifest.add("offsets", a.offsets);
  manifest.add("kernel", static_cast<std::int64_t>(a.kernel));
  manifest.add("stride", static_cast<std::int64_t>(a.stride));
  manifest.add("pad", static_cast<std::int64_t>(a.pad));
  manifest.add("dilation", static_cast<std::int64_t>(a.dilation));
  manifest.add("boxes", a.boxes.empty() ? "(none)" : a.boxes);

  std::vector<double> dilations;
  std::vector<FilterCategory> categories;
  const std::vector<Box> no_boxes;
  for (int n = 0; n < field_data.n(); ++n) {
    const auto it = boxes_by_batch.find(n);
    const std::vector<Box>& boxes = it == boxes_by_batch.end() ? no_boxes : it->second;
    for (int oy = 0; oy < field_data.h(); ++oy) {
      for (int ox = 0; ox < field_data.w(); ++ox) {
        dilations.push_back(effective_dilation(
            filter_sample_points(spec, field, n, oy, ox), a.kernel, a.kernel));
        categories.push_back(categorize(filter_center(spec, oy, ox), boxes));
      }
    }
  }

  std::vector<std::vector<std::string>> rows;
  for (const auto& [cat, stats] : aggregate_dilation_stats(dilations, categories))
    rows.push_back({category_name(cat), format_double(stats.mean),
                    format_double(stats.std_dev), std::to_string(stats.count)});
  write_csv(a.out, {"category", "mean", "std", "count"}, rows);
  manifest.finish(a.out);

  std::cout << "stats: " << dilations.size() << " filters in " << rows.size()
            << " categories\n";
  return 0;
}

struct BenchArgs {
  std::string op = "conv";
  std::string size = "1,2,24,24";
  int reps = 3;
  std::uint64_t seed = 12345;
  std::string out = "bench.csv";
};

template <typename Fn>
std::pair<double, double> time_reps(int reps, Fn&& fn) {
  std::vector<double> secs;
  secs.reserve(static_cast<std::size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    secs.push_back(dt.count());
  }
  std::sort(secs.begin(), secs.end());
  return {secs[secs.size() / 2], secs.front()};
}

int run_bench(const BenchArgs& a) {
  if (a.reps < 1) {
    std::cerr << "bench: --reps must be >= 1\n";
    return 2;
  }
  if (a.op != "conv" && a.op != "roi") {
    std::cerr << "bench: --op must be conv or roi\n";
    return 2;
  }
  const std::vector<int> dims = parse_int_list(a.size, 4, "--size");

  Manifest manifest("bench");
  manifest.add("op", a.op);
  manifest.add("size", a.size);
  manifest.add("reps", static_cast<std::int64_t>(a.reps));
  manifest.add("seed", a.seed);

  std::mt19937_64 rng(a.seed);
  const int threads = resolved_threads();
  std::vector<std::vector<std::string>> rows;
  const auto emit = [&](const char* variant, const char* impl,
                        std::pair<double, double> t) {
    rows.push_back({a.op, variant, impl, std::to_string(threads),
                    std::to_string(a.reps), format_double(t.first),
                    format_double(t.second)});
  };

  if (a.op == "conv") {
    ConvSpec spec;
    spec.pad_y = spec.pad_x = 1;
    const Tensor4 x = fill_random(dims[0], dims[1], dims[2], dims[3], rng(), -1.0, 1.0);
    const ConvWeights wt = random_weights(dims[1], dims[1], spec, rng());
    OffsetField off = OffsetField::zero_for(spec, dims[0], dims[2], dims[3]);
    for (std::int64_t i = 0; i < off.data.size(); ++i)
      off.data[i] = 0.7 * (static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5);

    emit("plain", "parallel", time_reps(a.reps, [&] { conv2d(x, wt, spec); }));
    emit("plain", "serial-reference",
         time_reps(a.reps, [&] { oracle::conv2d_naive(x, wt, spec); }));
    emit("deform", "parallel",
         time_reps(a.reps, [&] { deform_conv2d(x, wt, off, spec); }));
    emit("deform", "serial-reference",
         time_reps(a.reps, [&] { oracle::deform_conv2d_naive(x, wt, off, spec); }));
  } else {
    const Tensor4 x = fill_random(dims[0], dims[1], dims[2], dims[3], rng(), -1.0, 1.0);
    const int k = 3;
    std::vector<Roi> rois;
    std::vector<BinOffsets> offsets;
    for (int r = 0; r < 16; ++r) {
      rois.push_back(random_roi(rng, dims[0]));
      BinOffsets off = zero_bin_offsets(k);
      for (Point2& p : off.pixel)
        p = Point2{static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5,
                   static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5};
      offsets.push_back(std::move(off));
    }
    emit("plain", "parallel",
         time_reps(a.reps, [&] { roi_pool_batch(x, rois, k); }));
    emit("plain", "serial-reference", time_reps(a.reps, [&] {
           for (const Roi& r : rois) oracle::roi_pool_naive(x, r, k);
         }));
    emit("deform", "parallel",
         time_reps(a.reps, [&] { deform_roi_pool_batch(x, rois, k, offsets); }));
    emit("deform", "serial-reference", time_reps(a.reps, [&] {
           for (std::size_t r = 0; r < rois.size(); ++r)
             oracle::deform_roi_pool_naive(x, rois[r], k, offsets[r]);
         }));
  }

  write_csv(a.out, {"op", "variant", "impl", "threads", "reps", "median_s", "min_s"},
            rows);
  manifest.finish(a.out);
  std::cout << "bench " << a.op << ": " << rows.size() << " timing rows\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deformable convolution / RoI pooling operator toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 0;
  app.add_option("--threads", threads,
                 "OpenMP thread count (0 = machine default)");

  GradcheckArgs gc;
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Check analytic gradients against central finite differences");
  gradcheck->add_option("--op", gc.op, "deform-conv, deform-roi or deform-ps-roi")
      ->required()
      ->check(CLI::IsMember({"deform-conv", "deform-roi", "deform-ps-roi"}));
  gradcheck->add_option("--seed", gc.seed);
  gradcheck->add_option("--cases", gc.cases)->check(CLI::PositiveNumber);
  gradcheck->add_option("--eps", gc.eps, "finite-difference step");
  gradcheck->add_option("--tol", gc.tol, "relative error tolerance");
  gradcheck->add_option("--kink-margin", gc.kink_margin);
  gradcheck->add_option("--out", gc.out, "report CSV path");

  EquivArgs eq;
  CLI::App* equiv = app.add_subcommand(
      "equiv", "Analytic equivalences: zero-offset reduction, atrous construction");
  equiv->add_option("--mode", eq.mode)
      ->required()
      ->check(CLI::IsMember({"zero-offset", "atrous"}));
  equiv->add_option("--dilation", eq.dilation, "atrous dilation (2, 4, 6 or 8)");
  equiv->add_option("--seed", eq.seed);
  equiv->add_option("--cases", eq.cases)->check(CLI::PositiveNumber);
  equiv->add_option("--out", eq.out, "report CSV path");

  TrainShiftArgs ts;
  CLI::App* train_shift = app.add_subcommand(
      "train-shift", "Learn a constant sampling shift with SGD");
  train_shift->add_option("--dx", ts.dx, "target shift, x");
  train_shift->add_option("--dy", ts.dy, "target shift, y");
  train_shift->add_option("--iters", ts.iters)->check(CLI::NonNegativeNumber);
  train_shift->add_option("--lr", ts.lr)->check(CLI::PositiveNumber);
  train_shift->add_option("--beta", ts.beta, "offset-branch lr multiplier");
  train_shift->add_option("--seed", ts.seed);
  train_shift->add_option("--out", ts.out, "training curve CSV path");

  TraceArgs tr;
  CLI::App* trace = app.add_subcommand(
      "trace", "Expand one unit's sampling locations through stacked layers");
  trace->add_option("--layers", tr.layers);
  trace->add_option("--kernel", tr.kernel);
  trace->add_option("--dilation", tr.dilation);
  trace->add_option("--size", tr.size, "map size H,W");
  trace->add_option("--offsets", tr.offsets,
                    "tensor file with one batch slice per layer, or 'zero'");
  trace->add_option("--unit", tr.unit, "traced output unit y,x");
  trace->add_option("--out", tr.out, "points CSV path");

  StatsArgs st;
  CLI::App* stats = app.add_subcommand(
      "stats", "Effective-dilation statistics of an offset field");
  stats->add_option("--offsets", st.offsets, "offset field tensor file")->required();
  stats->add_option("--kernel", st.kernel);
  stats->add_option("--stride", st.stride);
  stats->add_option("--pad", st.pad);
  stats->add_option("--dilation", st.dilation);
  stats->add_option("--boxes", st.boxes, "ground-truth box CSV (batch,x,y,w,h)");
  stats->add_option("--out", st.out, "stats CSV path");

  BenchArgs be;
  CLI::App* bench = app.add_subcommand(
      "bench", "Time parallel kernels against the serial references");
  bench->add_option("--op", be.op, "conv or roi");
  bench->add_option("--size", be.size, "input dims n,c,h,w");
  bench->add_option("--reps", be.reps);
  bench->add_option("--seed", be.seed);
  bench->add_option("--out", be.out, "timing CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  apply_threads(threads);
  try {
    if (gradcheck->parsed()) return run_gradcheck(gc);
    if (equiv->parsed()) return run_equiv(eq);
    if (train_shift->parsed()) return run_train_shift(ts);
    if (trace->parsed()) return run_trace(tr);
    if (stats->parsed()) return run_stats(st);
    if (bench->parsed()) return run_bench(be);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

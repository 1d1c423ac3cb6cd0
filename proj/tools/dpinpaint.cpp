// Copyright 2026 The dpinpaint Authors
// SPDX-License-Identifier: Apache-2.0

// dpinpaint: audio inpainting by diffusion posterior sampling, the AR
// baseline, CQT transforms, metrics and a toy trainer.
//
// Exit codes: 0 ok, 2 I/O, 3 validation (including bad flags), 4 numerical.

#include <CLI11.hpp>

#include <cstring>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "dpinpaint/dpinpaint.hpp"

using namespace dpinpaint;

namespace {

constexpr int kExitIo = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNumerical = 4;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::io: return kExitIo;
    case ErrorKind::validation: return kExitValidation;
    case ErrorKind::numerical: return kExitNumerical;
  }
  return 1;
}

std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--config") == 0 && i + 1 < argc) return argv[i + 1];
    if (std::strncmp(argv[i], "--config=", 9) == 0) return argv[i] + 9;
  }
  return {};
}

GapSpec resolve_gaps(const JobConfig& cfg, std::size_t n, double fs) {
  if (!cfg.gaps.empty()) {
    double spec_fs = 0.0;
    GapSpec spec = load_gap_spec(cfg.gaps, n, &spec_fs);
    require(std::abs(spec_fs - fs) < 0.5,
            "gap spec sample_rate " + std::to_string(spec_fs) +
                " differs from audio sample rate " + std::to_string(fs));
    return spec;
  }
  if (cfg.equal_gaps > 0)
    return equally_spaced_gaps(n, cfg.equal_gaps, ms_to_samples(cfg.gap_ms, fs));
  return GapSpec{{}, n};
}

SamplerOrder parse_order(const std::string& s) {
  if (s == "first") return SamplerOrder::first;
  if (s == "second") return SamplerOrder::second;
  throw ValidationError("order must be 'first' or 'second'");
}

CqtParams cqt_params(const CqtSettings& s, double fs, std::size_t n) {
  CqtParams p;
  p.sample_rate = fs;
  p.bins_per_octave = s.bins_per_octave;
  p.num_octaves = s.num_octaves;
  p.f_min = s.f_min;
  p.validate_geometry();
  p.signal_length = p.padded_length(n);
  return p;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

// Metrics against the reference (or the input when none is given), written
// to cfg.metrics and echoed on stdout.
void report(const JobConfig& cfg, const Audio& input, const Waveform& output,
            const GapSpec& spec) {
  if (cfg.metrics.empty()) return;
  Waveform ref = input.samples;
  if (!cfg.reference.empty()) {
    const Audio r = read_wav(cfg.reference);
    require(r.samples.size() == output.size(),
            "reference length differs from the output length");
    ref = r.samples;
  }
  const auto rep = evaluate(ref, output, spec);
  write_json(cfg.metrics, to_json(rep));
  std::cout << to_json(rep).dump() << '\n';
}

void save_audio(const std::string& path, const Audio& like, Waveform samples) {
  Audio out;
  out.sample_rate = like.sample_rate;
  out.format = like.format;
  out.samples = std::move(samples);
  write_wav(path, out);
}

// ---------------------------------------------------------------------------

void run_inpaint(const JobConfig& cfg) {
  require(!cfg.input.empty() && !cfg.output.empty(), "inpaint needs --input and --output");
  const Audio in = read_wav(cfg.input);
  const std::size_t n0 = in.samples.size();
  const double fs = in.sample_rate;
  const GapSpec spec0 = resolve_gaps(cfg, n0, fs);

  SamplerConfig sampler;
  sampler.schedule = make_schedule(cfg.sampler.steps, cfg.sampler.sigma_min,
                                   cfg.sampler.sigma_max, cfg.sampler.rho,
                                   cfg.sampler.s_churn);
  sampler.rng_seed = cfg.seed;
  sampler.order = parse_order(cfg.sampler.order);
  const GuidanceConfig guidance{cfg.xi_prime, 1e-12};
  std::vector<TraceRow> trace;
  auto* trace_ptr = cfg.trace.empty() ? nullptr : &trace;

  Waveform out;
  const auto& d = cfg.denoiser;
  if (d.kind == "gaussian-white" || d.kind == "gaussian-ar1") {
    const auto problem = build_problem(spec0, in.samples, cfg.fade_ms, fs);
    const auto den = d.kind == "gaussian-white"
                         ? GaussianAnalyticDenoiser::white(n0, d.variance)
                         : GaussianAnalyticDenoiser::ar1(n0, d.ar1_a, d.variance);
    out = inpaint(problem, den, guidance, sampler, NoPostFilter{}, trace_ptr);
  } else if (d.kind == "linear-cqt") {
    require(!d.checkpoint.empty(), "linear-cqt denoiser needs --checkpoint");
    const GainCheckpoint ck = load_checkpoint(d.checkpoint);
    require(std::abs(ck.params.sample_rate - fs) < 0.5,
            "checkpoint sample rate differs from the audio sample rate");
    CqtParams p = ck.params;
    p.signal_length = p.padded_length(n0);
    auto plan = std::make_shared<const CqtPlan>(p);
    const Waveform x = pad_to_plan(in.samples, p);
    GapSpec spec = spec0;
    spec.signal_length = x.size();
    const auto problem = build_problem(spec, x, cfg.fade_ms, fs);
    const LinearCqtDenoiser den(plan, Preconditioning{ck.sigma_data},
                                d.use_ema ? ck.ema_gains : ck.gains);
    if (cfg.post_filter)
      out = inpaint(problem, den, guidance, sampler, DcNotchFilter{plan}, trace_ptr);
    else
      out = inpaint(problem, den, guidance, sampler, NoPostFilter{}, trace_ptr);
    out.resize(n0);
  } else {
    throw ValidationError("unknown denoiser '" + d.kind + "'");
  }
  save_audio(cfg.output, in, out);
  if (trace_ptr) write_trace_csv(cfg.trace, trace);
  report(cfg, in, out, spec0);
}

void run_baseline(const JobConfig& cfg) {
  require(!cfg.input.empty() && !cfg.output.empty(), "baseline needs --input and --output");
  const Audio in = read_wav(cfg.input);
  const GapSpec spec = resolve_gaps(cfg, in.samples.size(), in.sample_rate);
  Waveform y = in.samples;
  for (const Gap& g : spec.gaps)
    std::fill(y.begin() + g.start, y.begin() + g.end(), 0.0);
  const JanssenOptions opt{cfg.janssen.order, cfg.janssen.iterations,
                           cfg.janssen.max_context};
  const auto res = janssen_inpaint_detailed(y, spec, opt);
  for (const auto& g : res.gaps)
    std::cerr << "gap " << g.gap.start << "+" << g.gap.length << ": order " << g.order
              << ", context " << g.context_left << "/" << g.context_right << '\n';
  save_audio(cfg.output, in, res.output);
  report(cfg, in, res.output, spec);
}

struct EvalExtras {
  std::string csv;
  std::string spectrogram;
};

void run_eval(const JobConfig& cfg, const EvalExtras& extra) {
  require(!cfg.reference.empty() && !cfg.input.empty(),
          "eval needs --reference and --estimate");
  const Audio ref = read_wav(cfg.reference);
  const Audio est = read_wav(cfg.input);
  require(ref.samples.size() == est.samples.size(),
          "length mismatch: reference has " + std::to_string(ref.samples.size()) +
              " samples, estimate has " + std::to_string(est.samples.size()));
  const GapSpec spec = resolve_gaps(cfg, ref.samples.size(), ref.sample_rate);
  const auto rep = evaluate(ref.samples, est.samples, spec);
  if (!cfg.metrics.empty()) write_json(cfg.metrics, to_json(rep));
  if (!extra.csv.empty()) write_report_csv(extra.csv, rep);
  if (!extra.spectrogram.empty()) {
    write_spectrogram_csv(extra.spectrogram + "_reference.csv", ref.samples, ref.sample_rate);
    write_spectrogram_csv(extra.spectrogram + "_estimate.csv", est.samples, est.sample_rate);
  }
  std::cout << to_json(rep).dump(2) << '\n';
}

struct TransformOptions {
  std::string mode;
  std::size_t length = 0;        // inverse: samples to keep (0 = all)
  std::string format = "float32";
  double sample_rate = 44100.0;  // info
  double seconds = 4.17;         // info
};

nlohmann::json plan_summary(const CqtPlan& plan) {
  return {{"sample_rate", plan.params().sample_rate},
          {"bins_per_octave", plan.bins_per_octave()},
          {"num_octaves", plan.num_octaves()},
          {"f_min", plan.params().f_min},
          {"signal_length", plan.signal_length()},
          {"hops", plan.hops()},
          {"redundancy", plan.redundancy()},
          {"rasterized_redundancy", plan.rasterized_redundancy()}};
}

void run_transform(const JobConfig& cfg, const TransformOptions& t) {
  if (t.mode == "info") {
    const auto n = static_cast<std::size_t>(std::llround(t.seconds * t.sample_rate));
    const CqtPlan plan(cqt_params(cfg.cqt, t.sample_rate, n));
    std::cout << plan_summary(plan).dump(2) << '\n';
    return;
  }
  require(!cfg.input.empty(), "transform needs --input");
  if (t.mode == "inverse") {
    require(!cfg.output.empty(), "transform inverse needs --output");
    const RawCoeffs raw = read_coeff_raw(cfg.input);
    const CqtPlan plan(raw.params);
    Waveform x = plan.inverse(raw.coeffs);
    if (t.length > 0) {
      require(t.length <= x.size(), "--length exceeds the coefficient signal length");
      x.resize(t.length);
    }
    Audio out;
    out.sample_rate = raw.params.sample_rate;
    out.format = parse_sample_format(t.format);
    out.samples = std::move(x);
    write_wav(cfg.output, out);
    return;
  }

  const Audio in = read_wav(cfg.input);
  const CqtPlan plan(cqt_params(cfg.cqt, in.sample_rate, in.samples.size()));
  const Waveform x = pad_to_plan(in.samples, plan.params());
  const OctaveCoeffs c = plan.forward(x);
  if (t.mode == "forward") {
    require(!cfg.output.empty(), "transform forward needs --output <prefix>");
    write_coeff_raw(cfg.output + ".coeffs.csv", plan, c);
    write_coeff_db_csv(cfg.output, plan, c);
    std::cout << plan_summary(plan).dump(2) << '\n';
    return;
  }
  // roundtrip
  Waveform y = plan.inverse(c);
  const Waveform proj = plan.dc_notch(x);
  nlohmann::json j = plan_summary(plan);
  j["input_length"] = in.samples.size();
  j["snr_db"] = detail::db_value(snr(x, y));
  j["snr_vs_dc_notch_db"] = detail::db_value(snr(proj, y));
  std::cout << j.dump(2) << '\n';
  if (!cfg.output.empty()) {
    y.resize(in.samples.size());
    save_audio(cfg.output, in, y);
  }
  if (!cfg.metrics.empty()) write_json(cfg.metrics, j);
}

struct TrainCli {
  std::vector<std::string> inputs;
  std::size_t synthetic = 0;
  double variance = 0.25;
  double sample_rate = 8000.0;
  std::size_t samples = 2304;
  double sigma_data = 0.5;
  double init_gain = 1.0;
  TrainOptions opt;
  std::string checkpoint;
  std::string loss_curve;
};

void run_train(const JobConfig& cfg, const TrainCli& t) {
  require(!t.checkpoint.empty(), "train needs --checkpoint <out.csv>");
  std::vector<Waveform> data;
  double fs = t.sample_rate;
  std::size_t n = t.samples;
  if (!t.inputs.empty()) {
    const Audio first = read_wav(t.inputs.front());
    fs = first.sample_rate;
  }
  const CqtPlan probe(cqt_params(cfg.cqt, fs, n));
  n = probe.signal_length();
  auto plan = std::make_shared<const CqtPlan>(probe.params());

  Rng rng(cfg.seed);
  for (const auto& path : t.inputs) {
    const Audio a = read_wav(path);
    require(std::abs(a.sample_rate - fs) < 0.5, path + ": sample rate differs");
    for (std::size_t off = 0; off + n <= a.samples.size(); off += n)
      data.emplace_back(a.samples.begin() + off, a.samples.begin() + off + n);
  }
  Rng data_rng = rng.split(7);
  for (std::size_t i = 0; i < t.synthetic; ++i) {
    Waveform x(n);
    data_rng.fill_normal(x);
    for (double& v : x) v *= std::sqrt(t.variance);
    data.push_back(std::move(x));
  }
  require(!data.empty(), "train: empty dataset (give --input files or --synthetic-white)");

  const auto init = LinearCqtDenoiser::constant(plan, Preconditioning{t.sigma_data}, t.init_gain);
  Rng train_rng = rng.split(8);
  const TrainResult r = train_linear(init, data, t.opt, train_rng);
  GainCheckpoint ck{plan->params(), t.sigma_data, r.gains, r.ema_gains};
  save_checkpoint(t.checkpoint, ck);
  if (!t.loss_curve.empty()) write_loss_curve_csv(t.loss_curve, r);
  std::cout << "trained " << t.opt.steps << " steps on " << data.size()
            << " signals; final eval loss " << r.eval_loss.back() << '\n';
}

void add_gap_options(CLI::App* sub, JobConfig& cfg) {
  sub->add_option("--gaps", cfg.gaps, "Gap spec JSON");
  sub->add_option("--equal-gaps", cfg.equal_gaps,
                  "Number of equally spaced gaps (when --gaps is absent)");
  sub->add_option("--gap-ms", cfg.gap_ms, "Length of each equally spaced gap in ms");
}

void add_cqt_options(CLI::App* sub, JobConfig& cfg) {
  sub->add_option("--bins-per-octave", cfg.cqt.bins_per_octave);
  sub->add_option("--octaves", cfg.cqt.num_octaves);
  sub->add_option("--f-min", cfg.cqt.f_min, "Lowest center frequency in Hz (0: automatic)");
}

}  // namespace

int main(int argc, char** argv) {
  JobConfig cfg;
  try {
    const std::string config_path = find_config_arg(argc, argv);
    if (!config_path.empty()) cfg = load_job_config(config_path);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  }

  CLI::App app{"Audio inpainting with diffusion posterior sampling"};
  app.require_subcommand(1);
  std::string config_path, save_config;
  app.add_option("--config", config_path, "Load a job config (flags override it)");
  app.add_option("--save-config", save_config, "Write the effective job config");

  auto* inp = app.add_subcommand("inpaint", "Fill gaps with the conditioned sampler");
  inp->add_option("--input", cfg.input, "Input WAV")->required(cfg.input.empty());
  inp->add_option("--output", cfg.output, "Output WAV")->required(cfg.output.empty());
  add_gap_options(inp, cfg);
  inp->add_option("--reference", cfg.reference, "Clean reference for metrics");
  inp->add_option("--metrics", cfg.metrics, "Metric report JSON");
  inp->add_option("--trace", cfg.trace, "Per-step sampler trace CSV");
  inp->add_option("--seed", cfg.seed);
  inp->add_option("--steps", cfg.sampler.steps);
  inp->add_option("--schurn", cfg.sampler.s_churn);
  inp->add_option("--xi", cfg.xi_prime);
  inp->add_option("--rho", cfg.sampler.rho);
  inp->add_option("--sigma-min", cfg.sampler.sigma_min);
  inp->add_option("--sigma-max", cfg.sampler.sigma_max);
  inp->add_option("--order", cfg.sampler.order)->check(CLI::IsMember({"first", "second"}));
  inp->add_option("--fade-ms", cfg.fade_ms);
  inp->add_option("--denoiser", cfg.denoiser.kind)
      ->check(CLI::IsMember({"gaussian-white", "gaussian-ar1", "linear-cqt"}));
  inp->add_option("--ar1-a", cfg.denoiser.ar1_a);
  inp->add_option("--prior-var", cfg.denoiser.variance);
  inp->add_option("--checkpoint", cfg.denoiser.checkpoint);
  inp->add_option("--use-ema", cfg.denoiser.use_ema);
  inp->add_option("--post-filter", cfg.post_filter, "DC notch after a CQT denoiser");

  auto* base = app.add_subcommand("baseline", "Fill gaps with the AR (Janssen) method");
  base->add_option("--input", cfg.input)->required(cfg.input.empty());
  base->add_option("--output", cfg.output)->required(cfg.output.empty());
  add_gap_options(base, cfg);
  base->add_option("--reference", cfg.reference);
  base->add_option("--metrics", cfg.metrics);
  base->add_option("--ar-order", cfg.janssen.order, "AR order (0: automatic)");
  base->add_option("--iters", cfg.janssen.iterations);
  base->add_option("--context", cfg.janssen.max_context);

  EvalExtras eval_extra;
  auto* ev = app.add_subcommand("eval", "SNR and LSD of an estimate");
  ev->add_option("--reference", cfg.reference)->required(cfg.reference.empty());
  ev->add_option("--estimate", cfg.input)->required(cfg.input.empty());
  add_gap_options(ev, cfg);
  ev->add_option("--metrics", cfg.metrics, "Report JSON");
  ev->add_option("--csv", eval_extra.csv, "Report CSV");
  ev->add_option("--spectrogram", eval_extra.spectrogram, "Prefix for dB spectrogram CSVs");

  TransformOptions tr;
  auto* tf = app.add_subcommand("transform", "CQT forward / inverse / round trip");
  tf->add_option("mode", tr.mode)
      ->required()
      ->check(CLI::IsMember({"forward", "inverse", "roundtrip", "info"}));
  tf->add_option("--input", cfg.input);
  tf->add_option("--output", cfg.output);
  tf->add_option("--metrics", cfg.metrics);
  tf->add_option("--length", tr.length, "inverse: samples to keep");
  tf->add_option("--format", tr.format, "inverse: output sample format")
      ->check(CLI::IsMember({"pcm16", "pcm24", "float32"}));
  tf->add_option("--sample-rate", tr.sample_rate, "info: sample rate");
  tf->add_option("--seconds", tr.seconds, "info: signal duration");
  add_cqt_options(tf, cfg);

  TrainCli tc;
  auto* trn = app.add_subcommand("train", "Train the linear CQT-domain denoiser");
  trn->add_option("--input", tc.inputs, "Training WAV files");
  trn->add_option("--synthetic-white", tc.synthetic, "Number of white Gaussian signals");
  trn->add_option("--variance", tc.variance, "Variance of the synthetic signals");
  trn->add_option("--sample-rate", tc.sample_rate, "Sample rate for synthetic data");
  trn->add_option("--samples", tc.samples, "Segment length (padded to the plan)");
  trn->add_option("--sigma-data", tc.sigma_data);
  trn->add_option("--init-gain", tc.init_gain);
  trn->add_option("--steps", tc.opt.steps);
  trn->add_option("--lr", tc.opt.learning_rate);
  trn->add_option("--batch", tc.opt.batch_size);
  trn->add_option("--ema", tc.opt.ema_decay);
  trn->add_option("--sigma-min", tc.opt.sigma_min);
  trn->add_option("--sigma-max", tc.opt.sigma_max);
  trn->add_option("--seed", cfg.seed);
  trn->add_option("--checkpoint", tc.checkpoint, "Output gain CSV")->required();
  trn->add_option("--loss-curve", tc.loss_curve, "Loss curve CSV");
  add_cqt_options(trn, cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    const auto* sub = app.get_subcommands().front();
    cfg.command = sub->get_name();
    if (!save_config.empty()) save_job_config(save_config, cfg);
    if (sub == inp) run_inpaint(cfg);
    else if (sub == base) run_baseline(cfg);
    else if (sub == ev) run_eval(cfg, eval_extra);
    else if (sub == tf) run_transform(cfg, tr);
    else if (sub == trn) run_train(cfg, tc);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    std::cerr << "error: out of memory\n";
    return kExitNumerical;
  }
  return 0;
}

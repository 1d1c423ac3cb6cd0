#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dpinpaint/dpinpaint.hpp"
#include "support.hpp"

using namespace dpinpaint;

namespace {

int run(const std::string& args, const std::string& stdout_file = "cli_stdout.txt") {
  const std::string cmd =
      std::string(DPINPAINT_CLI) + " " + args + " > " + stdout_file + " 2> cli_stderr.txt";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json json_file(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

void write_mono(const std::string& path, const Waveform& x, double fs,
                SampleFormat fmt = SampleFormat::pcm16) {
  write_wav(path, Audio{fs, fmt, x, 1});
}

Waveform tone(std::size_t n, double f, double fs) { return testing::sine(n, f, fs, 0.5); }

}  // namespace

TEST_CASE("cli: inpaint without gaps keeps the payload") {
  Rng rng(1);
  Waveform x = testing::randn(rng, 4000, 0.1);
  write_mono("cli_noise.wav", x, 8000.0);
  REQUIRE(run("inpaint --input cli_noise.wav --output cli_same.wav --steps 5") == 0);
  const Audio a = read_wav("cli_noise.wav"), b = read_wav("cli_same.wav");
  CHECK(a.samples == b.samples);
  CHECK(slurp("cli_noise.wav") == slurp("cli_same.wav"));
}

TEST_CASE("cli: inpaint is reproducible and reports metrics") {
  write_mono("cli_tone.wav", tone(8000, 440.0, 8000.0), 8000.0);
  const std::string common =
      "inpaint --input cli_tone.wav --equal-gaps 2 --gap-ms 20 --steps 12 "
      "--reference cli_tone.wav --denoiser gaussian-ar1 --ar1-a 0.99 ";
  REQUIRE(run(common + "--seed 7 --output cli_a.wav --metrics cli_a.json --trace cli_a.csv") == 0);
  REQUIRE(run(common + "--seed 7 --output cli_b.wav --metrics cli_b.json") == 0);
  CHECK(slurp("cli_a.wav") == slurp("cli_b.wav"));
  const auto m = json_file("cli_a.json");
  CHECK(m["per_gap"].size() == 2);
  CHECK(m["snr_gaps_db"].is_number());
  // one trace row per sampler step plus the header
  const std::string trace = slurp("cli_a.csv");
  CHECK(std::count(trace.begin(), trace.end(), '\n') >= 12);

  REQUIRE(run(common + "--seed 8 --output cli_c.wav") == 0);
  CHECK(slurp("cli_a.wav") != slurp("cli_c.wav"));
}

TEST_CASE("cli: config files reproduce a run") {
  write_mono("cli_tone.wav", tone(8000, 440.0, 8000.0), 8000.0);
  REQUIRE(run("--save-config cli_job.json inpaint --input cli_tone.wav --output cli_cfg1.wav "
              "--equal-gaps 1 --gap-ms 10 --steps 8 --seed 3 --order second") == 0);
  const JobConfig cfg = load_job_config("cli_job.json");
  CHECK(cfg.sampler.order == "second");
  CHECK(cfg.seed == 3);
  REQUIRE(run("--config cli_job.json inpaint --output cli_cfg2.wav") == 0);
  CHECK(slurp("cli_cfg1.wav") == slurp("cli_cfg2.wav"));

  std::ofstream("cli_badjob.json") << R"({"schema_version": 1, "command": "inpaint", "stray": 1})";
  CHECK(run("--config cli_badjob.json inpaint --input cli_tone.wav --output x.wav") == 3);
}

TEST_CASE("cli: AR baseline") {
  write_mono("cli_tone44.wav", tone(44100, 440.0, 44100.0), 44100.0, SampleFormat::float32);
  std::ofstream("cli_gap10.json")
      << R"({"sample_rate": 44100, "gaps": [{"start_ms": 500.0, "length_ms": 10.0}]})";
  REQUIRE(run("baseline --input cli_tone44.wav --output cli_ar.wav --gaps cli_gap10.json "
              "--ar-order 8 --iters 5 --reference cli_tone44.wav --metrics cli_ar.json") == 0);
  CHECK(json_file("cli_ar.json")["snr_gaps_db"].get<double>() >= 40.0);

  REQUIRE(run("baseline --input cli_tone44.wav --output cli_ar0.wav") == 0);
  CHECK(read_wav("cli_ar0.wav").samples == read_wav("cli_tone44.wav").samples);

  std::ofstream("cli_gap_edge.json")
      << R"({"sample_rate": 44100, "gaps": [{"start_ms": 0.0, "length_ms": 10.0}]})";
  CHECK(run("baseline --input cli_tone44.wav --output x.wav --gaps cli_gap_edge.json") == 3);
  CHECK(slurp("cli_stderr.txt").find("context") != std::string::npos);
}

TEST_CASE("cli: eval") {
  Rng rng(2);
  const auto x = testing::randn(rng, 8000, 0.2);
  write_mono("cli_ref.wav", x, 8000.0, SampleFormat::float32);
  REQUIRE(run("eval --reference cli_ref.wav --estimate cli_ref.wav --equal-gaps 2 "
              "--metrics cli_eval.json --csv cli_eval.csv --spectrogram cli_spec") == 0);
  const auto m = json_file("cli_eval.json");
  CHECK(m["snr_full_db"] == "inf");
  CHECK(m["lsd_db"] == 0.0);
  CHECK(!slurp("cli_spec_reference.csv").empty());

  // zeros in the gaps: gap SNR is exactly 0 dB
  const auto spec = equally_spaced_gaps(x.size(), 2, ms_to_samples(50.0, 8000.0));
  Waveform masked(read_wav("cli_ref.wav").samples);
  for (const Gap& g : spec.gaps) std::fill(masked.begin() + g.start, masked.begin() + g.end(), 0.0);
  write_mono("cli_masked.wav", masked, 8000.0, SampleFormat::float32);
  REQUIRE(run("eval --reference cli_ref.wav --estimate cli_masked.wav --equal-gaps 2 "
              "--metrics cli_eval2.json") == 0);
  CHECK(std::abs(json_file("cli_eval2.json")["snr_gaps_db"].get<double>()) < 1e-9);

  write_mono("cli_short.wav", Waveform(x.begin(), x.begin() + 4000), 8000.0);
  CHECK(run("eval --reference cli_ref.wav --estimate cli_short.wav") == 3);
}

TEST_CASE("cli: transform") {
  // band-limited noise: random tones between 100 Hz and 3 kHz
  Rng rng(3);
  Waveform x(16000, 0.0);
  for (int k = 0; k < 40; ++k) {
    const double f = 100.0 + 2900.0 * rng.uniform(), ph = 6.28 * rng.uniform();
    const auto s = testing::sine(x.size(), f, 8000.0, 0.02, ph);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += s[i];
  }
  write_mono("cli_bl.wav", x, 8000.0, SampleFormat::float32);
  REQUIRE(run("transform roundtrip --input cli_bl.wav --output cli_bl_rt.wav "
              "--bins-per-octave 24 --octaves 6 --metrics cli_rt.json") == 0);
  const auto rt = json_file("cli_rt.json");
  CHECK(rt["snr_db"].get<double>() >= 60.0);

  REQUIRE(run("transform forward --input cli_bl.wav --output cli_fw --bins-per-octave 24 --octaves 6") == 0);
  REQUIRE(run("transform inverse --input cli_fw.coeffs.csv --output cli_inv.wav --length 16000") == 0);
  const Audio back = read_wav("cli_inv.wav");
  REQUIRE(back.samples.size() == x.size());
  CHECK(snr(read_wav("cli_bl.wav").samples, back.samples) >= 60.0);
  CHECK(!slurp("cli_fw_octave0.csv").empty());

  REQUIRE(run("transform info --sample-rate 44100 --seconds 4.17", "cli_info.json") == 0);
  const auto info = json_file("cli_info.json");
  CHECK(info["redundancy"].get<double>() >= 1.2);
  CHECK(info["redundancy"].get<double>() <= 1.6);

  { std::ofstream("cli_empty.wav").flush(); }
  CHECK(run("transform roundtrip --input cli_empty.wav") == 2);
}

TEST_CASE("cli: train then inpaint with the linear denoiser") {
  REQUIRE(run("train --synthetic-white 4 --steps 40 --seed 1 --checkpoint cli_ck.csv "
              "--loss-curve cli_loss.csv --bins-per-octave 12 --octaves 4") == 0);
  CHECK(!slurp("cli_loss.csv").empty());
  Rng rng(4);
  write_mono("cli_train_in.wav", testing::randn(rng, 2000, 0.3), 8000.0);
  REQUIRE(run("inpaint --input cli_train_in.wav --output cli_lin.wav --denoiser linear-cqt "
              "--checkpoint cli_ck.csv --equal-gaps 1 --gap-ms 20 --steps 10") == 0);
  CHECK(read_wav("cli_lin.wav").samples.size() == 2000);
  CHECK(run("inpaint --input cli_train_in.wav --output x.wav --denoiser linear-cqt") == 3);
}

TEST_CASE("cli: exit codes") {
  CHECK(run("inpaint --input does_not_exist.wav --output x.wav") == 2);
  CHECK(run("inpaint --bogus-flag") == 3);
  CHECK(run("frobnicate") == 3);
  write_mono("cli_tone.wav", tone(8000, 440.0, 8000.0), 8000.0);
  std::ofstream("cli_gap_bad.json") << R"({"sample_rate": 8000, "gaps": [{"start_ms": 990.0, "length_ms": 50.0}]})";
  CHECK(run("inpaint --input cli_tone.wav --output x.wav --gaps cli_gap_bad.json") == 3);
  std::ofstream("cli_gap_rate.json") << R"({"sample_rate": 44100, "gaps": []})";
  CHECK(run("inpaint --input cli_tone.wav --output x.wav --gaps cli_gap_rate.json") == 3);
}

// Command-line front end: feature extraction, synthesis, copy synthesis,
// complexity accounting, weight inspection and benchmarking.

#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <iostream>
#include <memory>
#include <string>

#include "lpcnet/lpcnet.hpp"

namespace {

using namespace lpcnet;

void print_report(const SynthesisReport& r) {
  std::printf("frames: %zu\n", r.frames);
  std::printf("samples: %zu\n", r.samples);
  std::printf("wall time: %.4f s\n", r.wall_seconds);
  std::printf("throughput: %.0f samples/s\n", r.samples_per_second);
  std::printf("real-time factor: %.4f\n", r.real_time_factor);
  std::printf("floor fallbacks: %zu\n", r.floor_fallbacks);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LPC-driven neural vocoder"};
  app.require_subcommand(1);

  std::string in_path, out_path, weights_path;
  SamplerConfig sampler;

  auto* features = app.add_subcommand("features", "Extract 20-dim feature frames from a 16 kHz WAV file");
  features->add_option("in", in_path, "input WAV")->required();
  features->add_option("out", out_path, "output feature file (20 float32 per frame)")->required();

  auto add_sampler_flags = [&](CLI::App* cmd) {
    cmd->add_option("--seed", sampler.seed, "sampling seed")->capture_default_str();
    cmd->add_option("--temp-scale", sampler.temp_scale, "multiplier on the pitch-dependent sharpening")
        ->capture_default_str();
    cmd->add_option("--floor", sampler.floor, "probability floor")->capture_default_str();
  };

  auto* synth = app.add_subcommand("synth", "Synthesize audio from a feature file");
  synth->add_option("weights", weights_path, "weight file")->required();
  synth->add_option("in", in_path, "input feature file")->required();
  synth->add_option("out", out_path, "output WAV")->required();
  add_sampler_flags(synth);

  auto* copy = app.add_subcommand("copy", "Analyze a WAV file and resynthesize it");
  copy->add_option("weights", weights_path, "weight file")->required();
  copy->add_option("in", in_path, "input WAV")->required();
  copy->add_option("out", out_path, "output WAV")->required();
  add_sampler_flags(copy);

  ComplexityInputs cx;
  auto* complexity = app.add_subcommand("complexity", "Print the per-second network cost");
  complexity->add_option("--na", cx.na, "GRU_A size")->capture_default_str();
  complexity->add_option("--nb", cx.nb, "GRU_B size")->capture_default_str();
  complexity->add_option("--q", cx.levels, "output levels")->capture_default_str();
  complexity->add_option("--density", cx.density, "GRU_A recurrent density")->capture_default_str();
  complexity->add_option("--rate", cx.rate, "sample rate")->capture_default_str();

  auto* dump = app.add_subcommand("dump", "List the tensors in a weight file");
  dump->add_option("weights", weights_path, "weight file")->required();

  BenchOptions bopt;
  auto* bench_cmd = app.add_subcommand("bench", "Measure synthesis throughput");
  bench_cmd->add_option("weights", weights_path, "weight file")->required();
  bench_cmd->add_option("--warmup", bopt.warmup_frames, "untimed frames per run")->capture_default_str();
  bench_cmd->add_option("--frames", bopt.timed_frames, "timed frames per run")->capture_default_str();
  bench_cmd->add_option("--runs", bopt.runs, "runs; the median is reported")->capture_default_str();

  ModelConfig mcfg;
  std::uint64_t model_seed = 1;
  bool unfolded = false;
  auto* randomize = app.add_subcommand("randomize", "Write a weight file with random parameters");
  randomize->add_option("out", out_path, "output weight file")->required();
  randomize->add_option("--na", mcfg.na, "GRU_A size")->capture_default_str();
  randomize->add_option("--nb", mcfg.nb, "GRU_B size")->capture_default_str();
  randomize->add_option("--width", mcfg.width, "frame-rate network width")->capture_default_str();
  randomize->add_option("--density", mcfg.density, "GRU_A recurrent density")->capture_default_str();
  randomize->add_option("--seed", model_seed, "initialization seed")->capture_default_str();
  randomize->add_flag("--unfolded", unfolded, "store the embedding table and input matrices instead");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*features) {
      const auto frames = extract_features(read_wav(in_path));
      write_features(out_path, to_vectors(frames));
      std::printf("%zu frames\n", frames.size());
    } else if (*synth) {
      auto model = std::make_shared<const Model>(load_weights(weights_path));
      const auto feats = read_features(in_path);
      std::size_t fallbacks = 0;
      const auto audio = synthesize(model, feats, sampler, &fallbacks);
      write_wav(out_path, audio);
      std::printf("%zu frames, %zu samples, %zu floor fallbacks\n", feats.size(), audio.size(), fallbacks);
    } else if (*copy) {
      auto model = std::make_shared<const Model>(load_weights(weights_path));
      const auto audio = copy_synthesis(model, read_wav(in_path), sampler);
      write_wav(out_path, audio.samples);
      std::printf("%zu samples\n", audio.size());
    } else if (*complexity) {
      const double net = complexity_gflops(cx);
      std::printf("network: %.3f GFLOPS\n", net);
      std::printf("total with %.1f GFLOPS overhead: %.3f GFLOPS\n", kNeglectedTermsGflops, net + kNeglectedTermsGflops);
    } else if (*dump) {
      const auto file = parse_tensor_file(detail::read_file(weights_path));
      std::cout << describe(file);
      const Model m = model_from_tensors(file);
      std::printf("model: N_A=%zu N_B=%zu conditioning=%zu\n", m.sample.na(), m.sample.nb(), m.sample.cond_size());
    } else if (*bench_cmd) {
      auto model = std::make_shared<const Model>(load_weights(weights_path));
      const auto res = bench(model, bopt);
      print_report(res.report);
      std::printf("GRU_A density: %.4f\n", res.gru_a_density);
      std::printf("model FLOPs/sample: %.0f\n", res.model_flops_per_sample);
      std::printf("formula FLOPs/sample: %.0f\n", res.formula_flops_per_sample);
      std::printf("relative difference: %.4f\n",
                  std::abs(res.model_flops_per_sample - res.formula_flops_per_sample) / res.formula_flops_per_sample);
    } else if (*randomize) {
      const Model m = random_model(mcfg, model_seed);
      if (unfolded) {
        std::mt19937_64 rng(model_seed ^ 0x5eedull);
        const auto u = random_unfolded_embeddings(mcfg.na, 16, mcfg.scale, rng);
        Model mu = m;
        mu.sample.embed = fold_embeddings(u);
        save_weights(out_path, mu, &u);
      } else {
        save_weights(out_path, m);
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

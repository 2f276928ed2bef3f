#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stegan/audit.hpp"
#include "stegan/baseline.hpp"
#include "stegan/error.hpp"
#include "stegan/metrics.hpp"
#include "stegan/png_io.hpp"
#include "stegan/stego.hpp"

namespace fs = std::filesystem;
using namespace stegan;

namespace {

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kBadArgs = 2,
  kDivergence = 3,
  kIo = 4,
  kSchemeMismatch = 5,
  kCorruptModel = 6,
};

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DuplicateKey: return kBadArgs;
    case ErrorCode::NonFinite:
    case ErrorCode::Divergence: return kDivergence;
    case ErrorCode::Io: return kIo;
    case ErrorCode::SchemeMismatch: return kSchemeMismatch;
    case ErrorCode::BadMagic:
    case ErrorCode::UnsupportedVersion:
    case ErrorCode::ChecksumMismatch:
    case ErrorCode::Malformed: return kCorruptModel;
  }
  return kFailure;
}

Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read " + path.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// "@path" reads the key bytes from a file; anything else is the UTF-8 text.
Bytes key_bytes(const std::string& arg) {
  if (arg.size() > 1 && arg[0] == '@') return read_file(arg.substr(1));
  return to_bytes(arg);
}

EmbeddingKey embedding_key(const std::string& arg) { return {key_bytes(arg), std::string(kNoiseScheme)}; }
ShuffleKey shuffle_key(const std::string& arg) { return {key_bytes(arg), std::string(kShuffleScheme)}; }

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

// Flat key = value lines overriding TrainConfig defaults; '#' starts a comment.
TrainConfig read_config(const fs::path& path) {
  TrainConfig cfg;
  std::map<std::string, std::function<void(const std::string&)>> setters{
      {"lambda", [&](const std::string& v) { cfg.lambda = std::stod(v); }},
      {"gp_coeff", [&](const std::string& v) { cfg.gp_coeff = std::stod(v); }},
      {"lr", [&](const std::string& v) { cfg.lr = std::stod(v); }},
      {"lr_decay", [&](const std::string& v) { cfg.lr_decay = std::stod(v); }},
      {"decay_at_fraction", [&](const std::string& v) { cfg.decay_at_fraction = std::stod(v); }},
      {"iters_per_stage", [&](const std::string& v) { cfg.iters_per_stage = std::stoi(v); }},
      {"stages", [&](const std::string& v) { cfg.stages = std::stoi(v); }},
      {"coarsest_min_dim", [&](const std::string& v) { cfg.coarsest_min_dim = std::stoi(v); }},
      {"trainable_block_window", [&](const std::string& v) { cfg.trainable_block_window = std::stoi(v); }},
      {"width", [&](const std::string& v) { cfg.width = std::stoi(v); }},
      {"critic_steps", [&](const std::string& v) { cfg.critic_steps = std::stoi(v); }},
      {"beta1", [&](const std::string& v) { cfg.beta1 = std::stod(v); }},
      {"beta2", [&](const std::string& v) { cfg.beta2 = std::stod(v); }},
      {"block_lr_scale", [&](const std::string& v) { cfg.block_lr_scale = std::stod(v); }},
      {"seed", [&](const std::string& v) { cfg.seed = std::stoull(v); }},
      {"penalty_norm",
       [&](const std::string& v) {
         if (v == "total") {
           cfg.penalty_norm = PenaltyNorm::Total;
         } else if (v == "per_pixel") {
           cfg.penalty_norm = PenaltyNorm::PerPixel;
         } else {
           throw std::invalid_argument(v);
         }
       }},
  };
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot read config " + path.string());
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (eq == std::string::npos) fail(ErrorCode::InvalidArgument, where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) fail(ErrorCode::InvalidArgument, where + ": unknown setting '" + key + "'");
    try {
      it->second(value);
    } catch (const std::logic_error&) {
      fail(ErrorCode::InvalidArgument, where + ": bad value '" + value + "' for " + key);
    }
  }
  cfg.validate();
  return cfg;
}

// Writes next to the destination and renames, so a failure leaves no partial file.
template <class Fn>
void write_atomically(const fs::path& path, Fn&& write) {
  fs::path tmp = path;
  tmp += ".partial";
  try {
    write(tmp);
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

void write_png_atomically(const fs::path& path, const ImageU8& img) {
  write_atomically(path, [&](const fs::path& tmp) { write_png(tmp, img); });
}

void require_png_output(const fs::path& path) {
  if (!is_lossless_extension(path)) {
    fail(ErrorCode::InvalidArgument, "output " + path.string() + " must be a lossless .png");
  }
}

void print_reference_scores(const ImageU8& out, const fs::path& reference) {
  ImageU8 ref = read_png(reference);
  if (ref.dims() != out.dims()) ref = resize(ref, out.height, out.width);
  std::printf("psnr = %.4f\nssim = %.6f\n", psnr(out, ref), ssim(out, ref));
}

struct TrainArgs {
  std::string cover, out, config, log;
  int checkpoint_every = 0;
  int log_every = 50;
};

void add_train_options(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--cover", a.cover, "Cover image (PNG)")->required();
  cmd->add_option("--out", a.out, "Model file to write (.sgn)")->required();
  cmd->add_option("--config", a.config, "key = value file overriding training defaults");
  cmd->add_option("--log", a.log, "JSON-lines training log (default: <out>.log.jsonl)");
  cmd->add_option("--log-every", a.log_every, "Iterations between log records")->check(CLI::PositiveNumber);
  cmd->add_option("--checkpoint-every", a.checkpoint_every, "Write <out>.ckpt every N iterations")
      ->check(CLI::NonNegativeNumber);
}

template <class Run>
int run_training(const TrainArgs& a, Run&& run) {
  const TrainConfig cfg = a.config.empty() ? TrainConfig{} : read_config(a.config);
  const fs::path out = a.out;
  const fs::path log_path = a.log.empty() ? fs::path(a.out + ".log.jsonl") : fs::path(a.log);
  std::ofstream log(log_path);
  if (!log) fail(ErrorCode::Io, "cannot write log " + log_path.string());
  TrainHooks hooks;
  hooks.log = &log;
  hooks.log_every = a.log_every;
  hooks.checkpoint_every = a.checkpoint_every;
  hooks.checkpoint = [&](const StegoModel& m, int, int) {
    fs::path ckpt = out;
    ckpt += ".ckpt";
    write_atomically(ckpt, [&](const fs::path& tmp) { save_file(tmp, m); });
  };
  const auto t0 = std::chrono::steady_clock::now();
  const StegoModel model = run(cfg, hooks);
  write_atomically(out, [&](const fs::path& tmp) { save_file(tmp, model); });
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "trained in %.1f s, wrote %s\n", seconds, out.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hide images in single-image generative models"};
  app.require_subcommand(1);
  int result = kOk;

  // hide
  TrainArgs hide_args;
  std::vector<std::string> secrets, keys, shuffle_keys;
  bool obfuscate = false;
  auto* hide_cmd = app.add_subcommand("hide", "Train a stego model hiding 1-4 secrets");
  add_train_options(hide_cmd, hide_args);
  hide_cmd->add_option("--secret", secrets, "Secret image (PNG); repeat for more")->required();
  hide_cmd->add_option("--key", keys, "Embedding key, text or @file; one per secret")->required();
  hide_cmd->add_flag("--obfuscate", obfuscate, "Shuffle each secret's pixels before hiding");
  hide_cmd->add_option("--shuffle-key", shuffle_keys, "Shuffle key, text or @file; one per secret");
  hide_cmd->callback([&] {
    if (secrets.size() != keys.size()) {
      fail(ErrorCode::InvalidArgument, "hide: got " + std::to_string(secrets.size()) + " secrets but " +
                                           std::to_string(keys.size()) + " keys\n" + hide_cmd->help());
    }
    if (obfuscate != !shuffle_keys.empty() || (obfuscate && shuffle_keys.size() != secrets.size())) {
      fail(ErrorCode::InvalidArgument, "hide: --obfuscate needs exactly one --shuffle-key per secret");
    }
    const ImageU8 cover = read_png(hide_args.cover);
    std::vector<ImageU8> imgs;
    for (const auto& s : secrets) imgs.push_back(read_png(s));
    std::vector<EmbeddingKey> ekeys;
    for (const auto& k : keys) ekeys.push_back(embedding_key(k));
    HideOptions opt;
    opt.obfuscate = obfuscate;
    for (const auto& k : shuffle_keys) opt.shuffle_keys.push_back(shuffle_key(k));
    result = run_training(hide_args, [&](const TrainConfig& cfg, const TrainHooks& hooks) {
      return hide(cover, imgs, ekeys, opt, cfg, &hooks);
    });
  });

  // train (original model, no secrets)
  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train an original model on the cover alone");
  add_train_options(train_cmd, train_args);
  train_cmd->callback([&] {
    const ImageU8 cover = read_png(train_args.cover);
    result = run_training(train_args, [&](const TrainConfig& cfg, const TrainHooks& hooks) {
      return train(cover, {}, {}, cfg, &hooks).model;
    });
  });

  // extract
  std::string ex_model, ex_key, ex_shuffle, ex_out, ex_reference;
  auto* extract_cmd = app.add_subcommand("extract", "Recover a secret with its key");
  extract_cmd->add_option("--model", ex_model, "Stego model (.sgn)")->required();
  extract_cmd->add_option("--key", ex_key, "Embedding key, text or @file")->required();
  extract_cmd->add_option("--shuffle-key", ex_shuffle, "Shuffle key for obfuscated models");
  extract_cmd->add_option("--out", ex_out, "Output image (.png)")->required();
  extract_cmd->add_option("--reference", ex_reference, "Print PSNR and SSIM against this image");
  extract_cmd->callback([&] {
    require_png_output(ex_out);
    const StegoModel model = load_file(ex_model);
    const ShuffleKey sk = ex_shuffle.empty() ? ShuffleKey{} : shuffle_key(ex_shuffle);
    const ImageU8 out = extract(model, embedding_key(ex_key), ex_shuffle.empty() ? nullptr : &sk);
    write_png_atomically(ex_out, out);
    if (!ex_reference.empty()) print_reference_scores(out, ex_reference);
  });

  // sample
  std::string sm_model, sm_dir = ".";
  std::uint64_t sm_seed = 0;
  int sm_count = 1, sm_height = 0, sm_width = 0;
  auto* sample_cmd = app.add_subcommand("sample", "Draw unconditional samples");
  sample_cmd->add_option("--model", sm_model, "Model (.sgn)")->required();
  sample_cmd->add_option("--seed", sm_seed, "First sample seed");
  sample_cmd->add_option("-n", sm_count, "Number of samples")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--out-dir", sm_dir, "Directory for sample_<seed>.png files");
  auto* h_opt = sample_cmd->add_option("--height", sm_height, "Sample height (default: cover)")->check(CLI::PositiveNumber);
  auto* w_opt = sample_cmd->add_option("--width", sm_width, "Sample width (default: cover)")->check(CLI::PositiveNumber);
  h_opt->needs(w_opt);
  w_opt->needs(h_opt);
  sample_cmd->callback([&] {
    const StegoModel model = load_file(sm_model);
    const Dims size = sm_height > 0 ? Dims{sm_height, sm_width} : model.image_dims();
    fs::create_directories(sm_dir);
    for (int i = 0; i < sm_count; ++i) {
      const std::uint64_t seed = sm_seed + static_cast<std::uint64_t>(i);
      write_png_atomically(fs::path(sm_dir) / ("sample_" + std::to_string(seed) + ".png"), sample(model, seed, size));
    }
  });

  // audit
  std::string au_stego, au_original, au_cover, au_secret, au_out, au_hist;
  AuditOptions au_opt;
  auto* audit_cmd = app.add_subcommand("audit", "Security audit of a stego model");
  audit_cmd->add_option("--stego", au_stego, "Stego model (.sgn)")->required();
  auto* original_opt = audit_cmd->add_option("--original", au_original, "Original model trained on the same cover");
  audit_cmd->add_option("--cover", au_cover, "Cover image (PNG)")->required();
  auto* secret_opt = audit_cmd->add_option("--secret", au_secret, "Secret image for the leakage probe");
  audit_cmd->add_option("--samples", au_opt.leakage_samples, "Leakage samples")
      ->check(CLI::NonNegativeNumber)
      ->needs(secret_opt);
  audit_cmd->add_option("--diversity-samples", au_opt.diversity_samples, "Samples for SIFID and DS")
      ->check(CLI::Range(2, 100000));
  audit_cmd->add_option("--seed", au_opt.first_seed, "First sample seed");
  audit_cmd->add_option("--bins", au_opt.kld_bins, "Weight histogram bins")->check(CLI::PositiveNumber);
  audit_cmd->add_option("--out", au_out, "Report file (default: stdout)");
  audit_cmd->add_option("--hist-dir", au_hist, "Write per-block weight histogram CSVs here")->needs(original_opt);
  audit_cmd->callback([&] {
    const StegoModel stego = load_file(au_stego);
    std::optional<StegoModel> original;
    if (!au_original.empty()) original = load_file(au_original);
    const ImageU8 cover = read_png(au_cover);
    std::optional<ImageU8> secret;
    if (!au_secret.empty()) secret = read_png(au_secret);
    const AuditReport report = run_audit(stego, original ? &*original : nullptr, cover,
                                         secret ? &*secret : nullptr, au_opt);
    const std::string text = format_report(report);
    if (au_out.empty()) {
      std::cout << text;
    } else {
      write_atomically(au_out, [&](const fs::path& tmp) {
        std::ofstream f(tmp);
        f << text;
        if (!f.flush()) fail(ErrorCode::Io, "cannot write " + tmp.string());
      });
    }
    if (!au_hist.empty()) write_histogram_csvs(au_hist, *original, stego, au_opt.kld_bins);
  });

  // lsb
  auto* lsb_cmd = app.add_subcommand("lsb", "Bit-plane replacement baseline");
  lsb_cmd->require_subcommand(1);
  std::string lh_cover, lh_secret, lh_out;
  auto* lsb_hide_cmd = lsb_cmd->add_subcommand("hide", "Put the secret's high nibble in the cover's low nibble");
  lsb_hide_cmd->add_option("--cover", lh_cover, "Cover image (PNG)")->required();
  lsb_hide_cmd->add_option("--secret", lh_secret, "Secret image (PNG)")->required();
  lsb_hide_cmd->add_option("--out", lh_out, "Stego image (.png)")->required();
  lsb_hide_cmd->callback([&] {
    require_png_output(lh_out);
    const ImageU8 cover = read_png(lh_cover);
    ImageU8 secret = read_png(lh_secret);
    if (secret.dims() != cover.dims()) secret = resize(secret, cover.height, cover.width);
    write_png_atomically(lh_out, lsb_hide(cover, secret));
  });
  std::string le_stego, le_out, le_reference;
  auto* lsb_extract_cmd = lsb_cmd->add_subcommand("extract", "Recover the hidden high nibble");
  lsb_extract_cmd->add_option("--stego", le_stego, "Stego image (PNG)")->required();
  lsb_extract_cmd->add_option("--out", le_out, "Recovered image (.png)")->required();
  lsb_extract_cmd->add_option("--reference", le_reference, "Print PSNR and SSIM against this image");
  lsb_extract_cmd->callback([&] {
    require_png_output(le_out);
    const ImageU8 out = lsb_extract(read_png(le_stego));
    write_png_atomically(le_out, out);
    if (!le_reference.empty()) print_reference_scores(out, le_reference);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kBadArgs;
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", std::string(error_code_name(e.code())).c_str(), e.what());
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error (io): %s\n", e.what());
    return kIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return result;
}

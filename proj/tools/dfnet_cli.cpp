// dfnet command-line front end. Talks to the library only through dfnet.h.
#include <cstdio>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dfnet/dfnet.h"

namespace {

struct Command {
  const char* name;
  const char* help;
};

const Command kCommands[] = {
    {"generate", "render a synthetic image/depth dataset"},
    {"flow", "precompute optical flow for a dataset"},
    {"train", "train a depth network"},
    {"eval", "evaluate a checkpoint on a dataset"},
    {"infer", "predict depth for one image"},
    {"perturb", "write a blurred or darkened copy of a dataset"},
    {"robustness", "plain / blur3 / blur10 / darkened evaluation table"},
};

using ConfigPtr = std::unique_ptr<df_config, decltype(&df_config_destroy)>;

int fail(df_status st) {
  std::fprintf(stderr, "dfnet: %s\n", df_last_error());
  return int(st);
}

void print_metrics(const df_metrics& m) {
  std::printf("delta_1.25 %.17g\ndelta_1.5625 %.17g\ndelta_1.953125 %.17g\n", m.delta_1, m.delta_2, m.delta_3);
  std::printf("rmse %.17g\nlog_rmse %.17g\nscale_inv_mse %.17g\nn_pixels %llu\n", m.rmse, m.log_rmse,
              m.scale_inv_mse, static_cast<unsigned long long>(m.n_pixels));
}

void print_table(const df_metrics reports[4]) {
  const char* cols[4] = {"plain", "blur3", "blur10", "darkened"};
  const char* rows[6] = {"delta_1.25", "delta_1.5625", "delta_1.953125", "rmse", "log_rmse", "scale_inv_mse"};
  std::printf("%-16s", "metric");
  for (const char* c : cols) std::printf(" %9s", c);
  std::printf("\n");
  for (int r = 0; r < 6; ++r) {
    std::printf("%-16s", rows[r]);
    for (int c = 0; c < 4; ++c) {
      const df_metrics& m = reports[c];
      const double v[6] = {m.delta_1, m.delta_2, m.delta_3, m.rmse, m.log_rmse, m.scale_inv_mse};
      std::printf(" %9.3f", v[r]);
    }
    std::printf("\n");
  }
}

int run(const std::string& command, df_config* cfg) {
  df_status st = DF_OK;
  if (command == "generate") {
    int n = 0;
    st = df_cmd_generate(cfg, &n);
    if (st == DF_OK) std::printf("wrote %d frames\n", n);
  } else if (command == "flow") {
    int n = 0;
    st = df_cmd_flow(cfg, &n);
    if (st == DF_OK) std::printf("wrote %d flow files\n", n);
  } else if (command == "train") {
    df_train_summary s{};
    st = df_cmd_train(cfg, &s);
    if (st == DF_OK) {
      std::printf("epochs %d steps %d first_loss %.6f final_loss %.6f\n", s.epochs, s.steps, s.first_loss,
                  s.final_loss);
    }
  } else if (command == "eval") {
    df_metrics m{};
    st = df_cmd_eval(cfg, &m);
    if (st == DF_OK) print_metrics(m);
  } else if (command == "infer") {
    st = df_cmd_infer(cfg);
  } else if (command == "perturb") {
    st = df_cmd_perturb(cfg);
  } else if (command == "robustness") {
    df_metrics m[4]{};
    st = df_cmd_robustness(cfg, m);
    if (st == DF_OK) print_table(m);
  }
  return st == DF_OK ? 0 : fail(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dfnet: monocular depth from image and optical flow"};
  app.set_version_flag("--version", std::string(df_version()));
  app.require_subcommand(1);

  // One string slot per config key and subcommand; only options given on the
  // command line are forwarded, after the config file.
  struct Slots {
    CLI::App* app = nullptr;
    std::string config_file;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
  };
  std::vector<Slots> slots(std::size(kCommands));
  for (std::size_t c = 0; c < std::size(kCommands); ++c) {
    Slots& s = slots[c];
    s.app = app.add_subcommand(kCommands[c].name, kCommands[c].help);
    s.app->add_option("--config", s.config_file, "key-value config file")->check(CLI::ExistingFile);
    for (std::size_t k = 0; k < df_config_key_count(); ++k) {
      std::string key = df_config_key_name(k);
      std::string flag = key;
      for (char& ch : flag)
        if (ch == '_') ch = '-';
      s.options[key] = s.app->add_option("--" + flag, s.values[key]);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return DF_ERR_USAGE;
  }

  for (std::size_t c = 0; c < std::size(kCommands); ++c) {
    Slots& s = slots[c];
    if (!s.app->parsed()) continue;
    ConfigPtr cfg(df_config_create(), &df_config_destroy);
    if (!cfg) return fail(DF_ERR_INTERNAL);
    if (!s.config_file.empty()) {
      if (df_status st = df_config_load_file(cfg.get(), s.config_file.c_str()); st != DF_OK) return fail(st);
    }
    for (const auto& [key, opt] : s.options) {
      if (opt->count() == 0) continue;
      if (df_status st = df_config_set(cfg.get(), key.c_str(), s.values[key].c_str()); st != DF_OK) return fail(st);
    }
    return run(kCommands[c].name, cfg.get());
  }
  return DF_ERR_USAGE;
}

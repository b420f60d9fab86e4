// Copyright 2026 The Deletion Lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// deletion_lab <kind> [--config FILE] [--out DIR] [--set key=value ...]
//              [--key value ...]

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "deletion_lab/config.h"
#include "deletion_lab/error.h"
#include "deletion_lab/experiments.h"

namespace {

std::string KindList() {
  std::string s;
  for (const auto& k : deletion_lab::ExperimentKinds()) s += (s.empty() ? "" : ", ") + k;
  return s;
}

// Leftover "--key value" / "--key=value" pairs become config overrides.
void ApplyExtras(const std::vector<std::string>& extras, deletion_lab::ConfigTree& tree) {
  for (size_t i = 0; i < extras.size(); ++i) {
    const std::string& a = extras[i];
    if (a.rfind("--", 0) != 0 || a.size() < 3) {
      throw deletion_lab::Error(deletion_lab::ErrorCode::kConfigError,
                                "unexpected argument '" + a + "'");
    }
    const std::string body = a.substr(2);
    if (body.find('=') != std::string::npos) {
      tree.ApplyOverride(body);
    } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
      tree.Set(body, extras[++i]);
    } else {
      tree.Set(body, "true");
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2 || std::string(argv[1]) == "--help" || std::string(argv[1]) == "-h") {
    std::cout << "usage: deletion_lab <kind> [--config FILE] [--out DIR] [--set key=value] "
                 "[--key value]\nkinds: "
              << KindList() << "\n";
    return argc < 2 ? 2 : 0;
  }
  const std::string kind = argv[1];
  if (!deletion_lab::IsExperimentKind(kind)) {
    std::cerr << "error: unknown experiment kind '" << kind << "'; valid kinds: " << KindList()
              << "\n";
    return 2;
  }

  CLI::App app{"deletion_lab " + kind};
  app.allow_extras();
  std::string config_path;
  std::string out_dir = "results/" + kind;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "key = value config file");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--set", sets, "dot-path override key=value")->allow_extra_args(false);
  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    deletion_lab::ConfigTree tree;
    if (!config_path.empty()) tree = deletion_lab::ConfigTree::Load(config_path);
    for (const auto& s : sets) tree.ApplyOverride(s);
    ApplyExtras(app.remaining(), tree);
    auto result = deletion_lab::RunExperiment(kind, tree, out_dir);
    std::cout << result.summary.dump(2) << "\n";
    std::cerr << "wrote " << out_dir << " (config " << result.manifest.config_hash << ", "
              << result.manifest.seconds << " s)\n";
    return 0;
  } catch (const deletion_lab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return deletion_lab::ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}

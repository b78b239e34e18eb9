// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <memory>
#include <sstream>

#include "adjointc/error.hpp"
#include "adjointc/optimizer.hpp"
#include "adjointc/typetree.hpp"
#include "opt/util.hpp"

namespace adjointc {

namespace {
const std::vector<std::string> kKnownPasses = {"simplify", "licm", "inline", "dce", "cse"};
}

std::vector<std::string> default_pipeline() { return {"simplify", "licm", "inline", "dce"}; }

std::vector<std::string> parse_pipeline(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    if (std::find(kKnownPasses.begin(), kKnownPasses.end(), name) == kKnownPasses.end())
      throw Error(ErrorCode::InvalidArgument, "unknown pass '" + name + "'");
    out.push_back(name);
  }
  return out;
}

IrModule run_passes(const IrModule& m, const std::vector<std::string>& passes, const PassOptions& opts) {
  IrModule out = m;
  for (const auto& p : passes) {
    if (p == "inline") {
      inline_calls(out, opts.inline_threshold);
      continue;
    }
    std::unique_ptr<TypeEnv> env;
    if (p == "licm") {
      try {
        env = std::make_unique<TypeEnv>(analyze_types(out));
      } catch (const Error&) {
        env.reset();
      }
    }
    for (auto& f : out.functions) {
      if (f.is_declaration) continue;
      if (p == "simplify") simplify(f);
      else if (p == "licm") opt::licm_with(f, out, env.get());
      else if (p == "dce") dce(f, out);
      else if (p == "cse") cse(f);
      else throw Error(ErrorCode::InvalidArgument, "unknown pass '" + p + "'");
    }
  }
  return out;
}

}  // namespace adjointc

/*
 * Copyright 2026 The objshap Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Writes a small offline sample set:
//   <out>/street.{png,json}       one cluttered scene for `attribute`/`render`
//   <out>/focus/dataset.jsonl     grounding entries for `evaluate`
// Usage: make_demo_data [out_dir]   (default: samples)

#include <filesystem>
#include <iostream>
#include <string>

#include "objshap/error.hpp"
#include "objshap/synthetic.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  namespace syn = objshap::synthetic;
  const fs::path out = argc > 1 ? argv[1] : "samples";
  try {
    syn::RandomSceneOptions opts;
    opts.objects = 6;
    opts.width = 96;
    opts.height = 72;
    objshap::Scene street = syn::RandomScene(11, opts);
    const auto street_json = syn::WriteScene(street, out, "street");
    std::cout << street_json.string() << "\n";

    const fs::path focus_dir = out / "focus";
    std::string lines;
    for (std::uint64_t i = 0; i < 8; ++i) {
      auto [scene, target] = syn::FocusScene(100 + i, 3 + i % 4);
      const std::string stem = "focus_" + std::to_string(i);
      syn::WriteScene(scene, focus_dir, stem);
      lines += syn::DatasetLine(scene, stem, target).dump() + "\n";
    }
    objshap::WriteFileText(focus_dir / "dataset.jsonl", lines);
    std::cout << (focus_dir / "dataset.jsonl").string() << "\n";
  } catch (const objshap::Error& e) {
    std::cerr << "make_demo_data: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

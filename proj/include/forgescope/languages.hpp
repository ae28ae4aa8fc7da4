#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "forgescope/text.hpp"

namespace forgescope {

struct LanguageInfo {
  std::string_view name;
  std::vector<std::string_view> line_comments;
};

struct LanguageCount {
  std::size_t files = 0;
  std::size_t loc = 0;
  bool operator==(const LanguageCount&) const = default;
};

using LanguageTally = std::map<std::string, LanguageCount>;

namespace detail {

inline const std::map<std::string, LanguageInfo, std::less<>>& extension_table() {
  static const std::map<std::string, LanguageInfo, std::less<>> table = [] {
    std::map<std::string, LanguageInfo, std::less<>> t;
    auto add = [&](std::initializer_list<std::string_view> exts, std::string_view name,
                   std::vector<std::string_view> comments) {
      for (auto e : exts) t.emplace(std::string(e), LanguageInfo{name, comments});
    };
    const std::vector<std::string_view> slash{"//"};
    const std::vector<std::string_view> hash{"#"};
    const std::vector<std::string_view> dashdash{"--"};
    add({"c"}, "C", slash);
    add({"h", "hh", "hpp", "hxx"}, "C/C++ Header", slash);
    add({"cc", "cpp", "cxx", "c++"}, "C++", slash);
    add({"cs"}, "C#", slash);
    add({"java"}, "Java", slash);
    add({"kt", "kts"}, "Kotlin", slash);
    add({"scala"}, "Scala", slash);
    add({"groovy", "gradle"}, "Groovy", slash);
    add({"go"}, "Go", slash);
    add({"rs"}, "Rust", slash);
    add({"swift"}, "Swift", slash);
    add({"m"}, "Objective-C", slash);
    add({"dart"}, "Dart", slash);
    add({"js", "mjs", "cjs", "jsx"}, "JavaScript", slash);
    add({"ts", "tsx"}, "TypeScript", slash);
    add({"vue"}, "Vuejs Component", slash);
    add({"php"}, "PHP", {"//", "#"});
    add({"py", "pyw"}, "Python", hash);
    add({"ipynb"}, "Jupyter Notebook", {});
    add({"rb"}, "Ruby", hash);
    add({"pl", "pm"}, "Perl", hash);
    add({"sh"}, "Bourne Shell", hash);
    add({"bash"}, "Bourne Again Shell", hash);
    add({"zsh"}, "zsh", hash);
    add({"fish"}, "fish", hash);
    add({"ps1"}, "PowerShell", hash);
    add({"bat", "cmd"}, "DOS Batch", {"REM", "rem", "::"});
    add({"r"}, "R", hash);
    add({"jl"}, "Julia", hash);
    add({"lua"}, "Lua", dashdash);
    add({"hs"}, "Haskell", dashdash);
    add({"ml", "mli"}, "OCaml", {});
    add({"ex", "exs"}, "Elixir", hash);
    add({"erl"}, "Erlang", {"%"});
    add({"clj", "cljs"}, "Clojure", {";"});
    add({"el", "lisp"}, "Lisp", {";"});
    add({"scm"}, "Scheme", {";"});
    add({"f", "f90", "f95"}, "Fortran 90", {"!"});
    add({"pas"}, "Pascal", slash);
    add({"asm", "s"}, "Assembly", {";", "#"});
    add({"sql"}, "SQL", dashdash);
    add({"html", "htm"}, "HTML", {});
    add({"css"}, "CSS", {});
    add({"scss"}, "SCSS", slash);
    add({"sass"}, "Sass", slash);
    add({"less"}, "LESS", slash);
    add({"xml"}, "XML", {});
    add({"json"}, "JSON", {});
    add({"yaml", "yml"}, "YAML", hash);
    add({"toml"}, "TOML", hash);
    add({"ini", "cfg"}, "INI", {";", "#"});
    add({"md", "markdown"}, "Markdown", {});
    add({"rst"}, "reStructuredText", {});
    add({"tex"}, "TeX", {"%"});
    add({"cmake"}, "CMake", hash);
    add({"mk"}, "make", hash);
    add({"dockerfile"}, "Dockerfile", hash);
    add({"proto"}, "Protocol Buffers", slash);
    add({"tf"}, "HCL", {"#", "//"});
    add({"nix"}, "Nix", hash);
    add({"zig"}, "Zig", slash);
    add({"nim"}, "Nim", hash);
    add({"v", "sv"}, "Verilog-SystemVerilog", slash);
    add({"vhd", "vhdl"}, "VHDL", dashdash);
    add({"svelte"}, "Svelte", slash);
    return t;
  }();
  return table;
}

}  // namespace detail

/// Language of a repo-relative path by extension (case-insensitive), or by
/// a few well-known file names.
inline std::optional<LanguageInfo> detect_language(std::string_view path) {
  const auto slash = path.rfind('/');
  const std::string base = text::to_lower(slash == std::string_view::npos ? path : path.substr(slash + 1));
  const auto& table = detail::extension_table();
  if (base == "makefile" || base == "gnumakefile") return LanguageInfo{"make", {"#"}};
  if (base == "dockerfile") return table.find("dockerfile")->second;
  if (base == "cmakelists.txt") return table.find("cmake")->second;
  const auto dot = base.rfind('.');
  if (dot == std::string::npos || dot == 0) return std::nullopt;
  const auto it = table.find(std::string_view(base).substr(dot + 1));
  if (it == table.end()) return std::nullopt;
  return it->second;
}

inline bool looks_binary(std::string_view content) {
  return content.substr(0, 8000).find('\0') != std::string_view::npos;
}

/// Non-blank lines that are not pure line comments.
inline std::size_t count_loc(std::string_view content, const LanguageInfo& lang) {
  std::size_t loc = 0;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    const auto line = text::trim(content.substr(pos, end - pos));
    pos = end + 1;
    if (line.empty()) continue;
    const bool comment = std::any_of(lang.line_comments.begin(), lang.line_comments.end(),
                                     [&](std::string_view p) { return line.starts_with(p); });
    if (!comment) ++loc;
  }
  return loc;
}

/// Adds one file to the tally. Returns false when the file is skipped
/// (unknown extension or binary content).
inline bool tally_file(LanguageTally& tally, std::string_view path, std::string_view content) {
  const auto lang = detect_language(path);
  if (!lang || looks_binary(content)) return false;
  auto& entry = tally[std::string(lang->name)];
  ++entry.files;
  entry.loc += count_loc(content, *lang);
  return true;
}

enum class LanguageMeasure { Loc, Files };

/// Argmax of the tally; ties go to the lexicographically smallest name.
inline std::optional<std::string> top_language(const LanguageTally& tally, LanguageMeasure by) {
  std::optional<std::string> best;
  std::size_t best_value = 0;
  for (const auto& [name, count] : tally) {
    const auto v = by == LanguageMeasure::Loc ? count.loc : count.files;
    if (!best || v > best_value) {
      best = name;
      best_value = v;
    }
  }
  return best;
}

}  // namespace forgescope

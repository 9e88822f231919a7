#include <cstdio>
#include <memory>

#include "coverassert/canonical_json.hpp"
#include "coverassert/error.hpp"
#include "coverassert/feedback.hpp"
#include "coverassert/prompts.hpp"
#include "coverassert/provider.hpp"

namespace coverassert {

using nlohmann::json;

ScriptedStubGenerator::ScriptedStubGenerator(std::map<std::string, std::vector<std::string>> script)
    : script_(std::move(script)) {}

ScriptedStubGenerator ScriptedStubGenerator::from_file(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw SchemaViolation("", path.string() + ": " + e.what());
  }
  if (!doc.is_object() || doc.value("schema", std::string{}) != kStubSchema)
    throw SchemaViolation("/schema", path.string() + ": expected \"" + std::string(kStubSchema) + "\"");
  if (!doc.contains("points") || !doc["points"].is_object())
    throw SchemaViolation("/points", path.string() + ": expected an object");
  std::map<std::string, std::vector<std::string>> script;
  for (const auto& [point, texts] : doc["points"].items()) {
    if (texts.is_string()) {
      script[point].push_back(texts.get<std::string>());
    } else if (texts.is_array()) {
      for (const auto& t : texts) {
        if (!t.is_string()) throw SchemaViolation("/points/" + point, "expected strings");
        script[point].push_back(t.get<std::string>());
      }
    } else {
      throw SchemaViolation("/points/" + point, "expected a string or array of strings");
    }
  }
  return ScriptedStubGenerator(std::move(script));
}

std::vector<RawAssertion> ScriptedStubGenerator::generate(const FeedbackPayload& payload) {
  std::vector<RawAssertion> out;
  for (const auto& item : payload.items) {
    for (const auto& pt : item.uncovered_points) {
      auto it = script_.find(pt.point_id);
      if (it == script_.end()) continue;
      for (std::size_t k = 0; k < it->second.size(); ++k) {
        std::string id = pt.point_id + (k ? "." + std::to_string(k + 1) : "");
        out.push_back({id, it->second[k], payload.iteration});
      }
    }
  }
  return out;
}

ExternalCommandGenerator::ExternalCommandGenerator(std::filesystem::path command,
                                                   std::filesystem::path work_dir)
    : command_(std::move(command)), work_dir_(std::move(work_dir)) {}

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

}  // namespace

std::vector<RawAssertion> ExternalCommandGenerator::generate(const FeedbackPayload& payload) {
  auto payload_path = work_dir_ / ("generator_input_" + std::to_string(payload.iteration) + ".json");
  write_file_atomic(payload_path, canonical_dump(payload_to_json(payload)));

  std::string cmd = shell_quote(command_.string()) + " " + shell_quote(payload_path.string());
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) throw GeneratorFailure(payload.iteration, "cannot start " + command_.string());
  std::string output;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe.get())) output.append(buf, got);
  int status = pclose(pipe.release());
  if (status != 0)
    throw GeneratorFailure(payload.iteration, command_.string() + " exited with status " + std::to_string(status));
  if (output.find_first_not_of(" \t\r\n") == std::string::npos) return {};
  try {
    return parse_assertions_json(json::parse(output));
  } catch (const json::exception& e) {
    throw GeneratorFailure(payload.iteration, std::string("unreadable generator output: ") + e.what());
  } catch (const SchemaViolation& e) {
    throw GeneratorFailure(payload.iteration, std::string("unreadable generator output: ") + e.what());
  }
}

LiveLlmGenerator::LiveLlmGenerator(SemanticEngine& engine) : engine_(engine) {}

std::vector<RawAssertion> LiveLlmGenerator::generate(const FeedbackPayload& payload) {
  std::string prompt = render_prompt("generate_v1", {{"payload", canonical_dump(payload_to_json(payload))}});
  std::string reply = engine_.chat(prompt);
  try {
    auto doc = json::parse(extract_json_block(reply));
    auto raw = parse_assertions_json(doc);
    for (auto& r : raw) r.iteration = payload.iteration;
    return raw;
  } catch (const json::exception& e) {
    throw GeneratorFailure(payload.iteration, std::string("unreadable model reply: ") + e.what());
  } catch (const SchemaViolation& e) {
    throw GeneratorFailure(payload.iteration, std::string("unreadable model reply: ") + e.what());
  }
}

std::unique_ptr<GeneratorAdapter> make_generator(const std::filesystem::path& path,
                                                 const std::filesystem::path& work_dir) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) throw AdapterNotFound("generator not found: " + path.string());
  if (path.extension() == ".json")
    return std::make_unique<ScriptedStubGenerator>(ScriptedStubGenerator::from_file(path));
  using std::filesystem::perms;
  auto mode = std::filesystem::status(path, ec).permissions();
  if ((mode & (perms::owner_exec | perms::group_exec | perms::others_exec)) == perms::none)
    throw AdapterNotFound("generator is neither a .json fixture nor executable: " + path.string());
  return std::make_unique<ExternalCommandGenerator>(path, work_dir);
}

}  // namespace coverassert

#include "soap/external.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <sys/wait.h>

#include "soap/error.hpp"

namespace soap {

SolveResult parse_solver_output(const std::string& output, const WcnfInstance& instance) {
  SolveResult res;
  res.status = SolveStatus::timeout;
  std::string status;
  Assignment model(static_cast<std::size_t>(instance.var_count()) + 1, false);
  bool have_model = false;
  std::istringstream in(output);
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "s") {
      std::getline(ls >> std::ws, status);
      while (!status.empty() && (status.back() == '\r' || status.back() == ' ')) status.pop_back();
    } else if (tag == "v") {
      std::string tok;
      while (ls >> tok) {
        const bool bits = tok.find_first_not_of("01") == std::string::npos && tok.size() > 1;
        if (bits || (tok.size() == 1 && instance.var_count() == 1 && (tok == "0" || tok == "1") &&
                     !have_model)) {
          for (std::size_t i = 0; i < tok.size() && i < model.size() - 1; ++i) model[i + 1] = tok[i] == '1';
          have_model = true;
          continue;
        }
        long long l = 0;
        try {
          l = std::stoll(tok);
        } catch (const std::exception&) {
          throw InvalidInput("external solver: bad model token '" + tok + "'");
        }
        if (l == 0) continue;
        const auto v = static_cast<std::size_t>(l < 0 ? -l : l);
        if (v >= model.size()) throw InvalidInput("external solver: literal " + tok + " out of range");
        model[v] = l > 0;
        have_model = true;
      }
    }
  }
  if (status.empty()) throw InvalidInput("external solver: no status line in output");
  if (status != "OPTIMUM FOUND" && status != "SATISFIABLE" && status != "UNSATISFIABLE" &&
      status != "UNKNOWN")
    throw InvalidInput("external solver: unknown status '" + status + "'");
  if (status == "UNSATISFIABLE") {
    res.status = SolveStatus::hard_unsat;
    return res;
  }
  if (status == "OPTIMUM FOUND") res.status = SolveStatus::optimal;
  if ((status == "OPTIMUM FOUND" || status == "SATISFIABLE") && !have_model)
    throw InvalidInput("external solver reported '" + status + "' without a model");
  if (have_model && (status == "OPTIMUM FOUND" || status == "SATISFIABLE")) {
    if (!instance.satisfies_hard(model))
      throw ValidationError("external solver model violates a hard clause");
    res.has_model = true;
    res.cost = instance.cost(model);
    res.model = std::move(model);
  }
  return res;
}

SolveResult solve_external(const WcnfInstance& instance, const std::string& command,
                           const SolveOptions& options) {
  std::random_device rd;
  const auto path = std::filesystem::temp_directory_path() /
                    ("soap-" + std::to_string(rd()) + "-" + std::to_string(rd()) + ".wcnf");
  {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    write_wcnf(instance, out);
  }
  std::string cmd = command + " '" + path.string() + "' 2>/dev/null";
  if (options.timeout.count() > 0)
    cmd = "timeout " + std::to_string((options.timeout.count() + 999) / 1000) + "s " + cmd;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) {
    std::filesystem::remove(path);
    throw Error("cannot run external solver '" + command + "'");
  }
  std::string output;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) output.append(buf, n);
  const int rc = pclose(pipe);
  std::filesystem::remove(path);
  // `timeout` exits with 124 when it had to stop the solver
  if (options.timeout.count() > 0 && WIFEXITED(rc) && WEXITSTATUS(rc) == 124 &&
      output.find("\ns ") == std::string::npos && output.rfind("s ", 0) != 0)
    return SolveResult{SolveStatus::timeout, false, {}, 0, 0};
  try {
    return parse_solver_output(output, instance);
  } catch (const InvalidInput& e) {
    throw InvalidInput(std::string(e.what()) + " (command '" + command + "', exit status " +
                       std::to_string(WIFEXITED(rc) ? WEXITSTATUS(rc) : -1) + ")");
  }
}

}  // namespace soap

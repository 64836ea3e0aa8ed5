// Test backend: echoes the first two input columns as the embedding.
//
//   echo_backend [--short] [--fail] [--garbage] [--error] [--nan]
//                [--sleep SECONDS] [--dump FILE]

#include <chrono>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "vistune/csv.hpp"

int main(int argc, char** argv) {
  CLI::App app{"echo backend"};
  bool short_rows = false, fail = false, garbage = false, error = false, nan = false;
  double sleep_s = 0.0;
  std::string dump;
  app.add_flag("--short", short_rows, "return one row too few");
  app.add_flag("--fail", fail, "exit with status 3");
  app.add_flag("--garbage", garbage, "print non-JSON output");
  app.add_flag("--error", error, "return a JSON error object");
  app.add_flag("--nan", nan, "return a non-finite coordinate");
  app.add_option("--sleep", sleep_s, "sleep before answering");
  app.add_option("--dump", dump, "copy the request to this file");
  CLI11_PARSE(app, argc, argv);

  const std::string input{std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
  if (!dump.empty()) std::ofstream(dump) << input;
  if (sleep_s > 0) std::this_thread::sleep_for(std::chrono::duration<double>(sleep_s));
  if (fail) {
    std::cerr << "echo backend: forced failure\n";
    std::cout << R"({"error": "forced failure"})";
    return 3;
  }
  if (garbage) {
    std::cout << "this is not json";
    return 0;
  }
  if (error) {
    std::cout << R"({"error": "requested error"})";
    return 0;
  }

  nlohmann::json req;
  try {
    req = nlohmann::json::parse(input);
  } catch (const std::exception& e) {
    std::cout << nlohmann::json{{"error", std::string("malformed request: ") + e.what()}}.dump();
    return 2;
  }
  const auto& data = req.at("data");
  const std::size_t rows = data.at("rows").get<std::size_t>();
  const std::size_t cols = data.at("cols").get<std::size_t>();
  std::vector<double> values;
  if (data.contains("values")) {
    values = data.at("values").get<std::vector<double>>();
  } else {
    const auto ds = vistune::read_dataset(data.at("path").get<std::string>(), "");
    values = ds.features.values();
  }
  if (values.size() != rows * cols) {
    std::cout << nlohmann::json{{"error", "value count does not match rows*cols"}}.dump();
    return 2;
  }
  std::cerr << "echo backend: " << rows << "x" << cols << " method " << req.at("method").get<std::string>()
            << "\n";
  nlohmann::json coords = nlohmann::json::array();
  const std::size_t out_rows = short_rows && rows > 0 ? rows - 1 : rows;
  for (std::size_t i = 0; i < out_rows; ++i) {
    const double x = cols > 0 ? values[i * cols] : 0.0;
    const double y = cols > 1 ? values[i * cols + 1] : 0.0;
    if (nan && i == 0) {
      coords.push_back({nullptr, y});
    } else {
      coords.push_back({x, y});
    }
  }
  std::cout << nlohmann::json{{"coordinates", coords}}.dump();
  return 0;
}

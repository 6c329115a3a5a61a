// Test double for the external scoring protocol. Mode is argv[1].
#include <fstream>
#include <iostream>
#include <string>

#include <json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "ok";
  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "exit") return 0;
    const auto req = nlohmann::json::parse(line);
    const std::size_t n = req.at("classes").size();
    std::ifstream img(req.at("image").get<std::string>(), std::ios::binary);
    std::string magic;
    img >> magic;
    nlohmann::json conf = nlohmann::json::array();
    for (std::size_t i = 0; i < n; ++i) conf.push_back(magic == "P6" && i == 0 ? 0.9 : 0.1 / (n - 1));
    if (mode == "bad_json") std::cout << "{confidence: oops\n";
    else if (mode == "wrong_size") std::cout << nlohmann::json{{"confidence", {0.5, 0.5}}}.dump() << "\n";
    else if (mode == "out_of_range") {
      conf[0] = 1.5;
      std::cout << nlohmann::json{{"confidence", conf}}.dump() << "\n";
    } else std::cout << nlohmann::json{{"confidence", conf}}.dump() << "\n";
    std::cout.flush();
  }
  return 0;
}

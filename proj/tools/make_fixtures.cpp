// Regenerates the fixture suite. The output is deterministic for a given seed.
#include <CLI11.hpp>
#include <iostream>

#include "toolret/fixtures.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Generate the deterministic fixture suite"};
    std::string out_dir = TOOLRET_FIXTURE_DIR;
    std::uint64_t seed = toolret::fixtures::kDefaultSeed;
    app.add_option("-o,--out", out_dir, "output directory");
    app.add_option("--seed", seed, "generation seed");
    CLI11_PARSE(app, argc, argv);
    try {
        auto suite = toolret::fixtures::generate_fixture(out_dir, seed);
        std::cout << suite.checksum << "\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

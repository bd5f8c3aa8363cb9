// Regenerates scenarios/default.json and the data/default bundle from the built-in defaults.
#include "ocsim/csv.hpp"
#include "ocsim/scenario.hpp"

#include <iostream>

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: ocsim_export_defaults <repo-root>\n";
        return 3;
    }
    const std::filesystem::path root{argv[1]};
    auto config = ocsim::default_scenario();
    ocsim::write_distribution_bundle(config.distributions, root / "data" / "default");
    config.distribution_bundle = "../data/default";
    std::filesystem::create_directories(root / "scenarios");
    ocsim::write_text_file(root / "scenarios" / "default.json", ocsim::to_json(config, true).dump(2) + "\n");
    return 0;
}

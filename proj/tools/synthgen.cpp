#include <iostream>

#include "CLI11.hpp"
#include "sessionlens/synthgen.hpp"

using namespace sessionlens;

int main(int argc, char** argv) {
  CLI::App app{"Synthetic session dataset generator"};
  std::string spec_path, out_dir;
  bool clean = false;
  app.add_option("--spec", spec_path, "Generator spec (JSON)")->required()->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_flag("--clean", clean, "Ignore the spec's degradations section");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto spec = synth::load_spec(spec_path);
    const auto truth = clean ? synth::generate(spec, out_dir)
                             : synth::generate_degraded(spec, spec.degradations, out_dir);
    std::size_t gaps = 0;
    for (const auto& s : truth.sessions) gaps += s.gaps.size();
    std::cout << "wrote " << truth.sessions.size() << " sessions to " << out_dir;
    if (gaps > 0) std::cout << " (" << gaps << " injected gaps)";
    std::cout << "\n";
  } catch (const synth::SpecError& e) {
    std::cerr << "synthgen: invalid spec: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "synthgen: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

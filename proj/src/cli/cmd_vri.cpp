#include <fstream>
#include <iostream>

#include "cli_common.hpp"

namespace fedleak::cli {

int cmd_vri(const CommonArgs& args) {
  runspec::Experiment exp = load_experiment(args);
  require(SnapshotStore::exists(store_dir(exp)), ErrorKind::io,
          "no snapshot store under " + store_dir(exp) + "; run train first");
  SnapshotStore store = runspec::open_or_create_store(exp, store_dir(exp));
  const auto& assets = runspec::ensure_assets(exp, assets_dir(exp));

  auto verdicts = forensics::vri_over_store(store, assets.base, assets.refs, assets.layers,
                                            exp.cfg.attack.vri);

  std::vector<int> identified, truth;
  for (const auto& meta : store.globals())
    if (meta.victim_present) truth.push_back(meta.round);
  std::string path = exp.cfg.out_dir + "/vri.csv";
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorKind::io, "cannot write " + path);
  f << "round,layer_id,delta,verdict,p_regular,p_sensitive\n";
  for (const auto& rv : verdicts) {
    if (rv.verdict.victim) identified.push_back(rv.round);
    for (size_t l = 0; l < assets.layers.size(); ++l)
      f << rv.round << "," << assets.layers[l] << "," << rv.verdict.delta_i[l] << ","
        << (rv.verdict.victim ? 1 : 0) << "," << rv.verdict.vs_regular.p_value << ","
        << rv.verdict.vs_sensitive.p_value << "\n";
  }
  require(f.good(), ErrorKind::io, "short write: " + path);

  auto score = attack::score_identification(identified, truth);
  std::cout << "rounds " << verdicts.size() << " identified " << identified.size()
            << " truth " << truth.size() << "\n";
  std::cout << "precision " << score.precision << " recall " << score.recall << "\n";
  return 0;
}

}  // namespace fedleak::cli

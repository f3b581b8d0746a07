"""`fit fedsim`: federated FiT simulation and its communication ledger.

Per seed the output directory holds rounds.jsonl (one RoundLog per round,
round 0 being the untrained baseline), global_film.bin, global_cache.bin,
personalized/client_<id>.bin, clients.json and, with the ladder enabled,
bounds.json. Several seeds go to seed_<n>/ subdirectories and summary.json
aggregates them. `--ledger-only` skips training and writes ledger.json.
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Any

from src.backbones.film import save_film
from src.backbones.spec import RESNET50_FILM_LAYOUT, BackboneSpec, film_param_count
from src.fed.baselines import lower_bound, upper_bound
from src.fed.config import FedConfig
from src.fed.ledger import communication_cost
from src.fed.simulator import run_federated
from src.heads.naive_bayes import save_cache
from src.utils.stats import summarize_seeds

from .common import RunStep, write_json

logger = logging.getLogger(__name__)

LADDER = ("lower", "fl", "upper")


class FedsimStep(RunStep):
    @property
    def name(self) -> str:
        return "fedsim"

    @property
    def description(self) -> str:
        return "Simulate federated FiT training and account for communication."

    def run(self) -> int:
        if not self.validate():
            return 1
        fed_config = self.section(FedConfig, "fed")
        if self.options.ledger_only:
            self._write_ledger(fed_config)
            self.write_run_files(fed_config.seed)
            return 0

        train, test, _ = self.load_datasets()
        if test is None:
            logger.error("fedsim needs a held-out set (--test) to score rounds")
            return 1
        spec = self.backbone_spec(train.dim)
        backbone = spec.build()

        seeds = [fed_config.seed + k for k in range(self.options.num_seeds)]
        results = []
        with self.tracker() as tracker:
            tracker.log_params(self.config)
            for seed in seeds:
                out_dir = self.out_dir if len(seeds) == 1 else self.out_dir / f"seed_{seed}"
                config = replace(fed_config, seed=seed)
                results.append(self._run_seed(train, test, backbone, config, out_dir, tracker))

        summary = self._summarize(results)
        write_json(summary, self.out_dir / "summary.json")
        self.write_run_files(fed_config.seed, {"backbone": spec.to_dict()})
        return 0

    def _run_seed(self, train, test, backbone, config: FedConfig, out_dir: Path, tracker) -> dict:
        result = run_federated(
            train, test, backbone, config, tracker=tracker, log_path=out_dir / "rounds.jsonl"
        )
        save_film(result.global_psi, out_dir / "global_film.bin")
        save_cache(result.global_cache, out_dir / "global_cache.bin")
        for cid, model in sorted(result.personal_models.items()):
            save_cache(model.cache, out_dir / "personalized" / f"client_{cid:03d}.bin")
        write_json(
            {str(c.client_id): list(c.classes) for c in result.clients},
            out_dir / "clients.json",
        )

        final = result.final
        record: dict[str, Any] = {
            "seed": config.seed,
            "fl": {"global_acc": final.global_acc, "personalized_acc": final.personalized_acc},
            "cum_cost": final.cum_cost,
        }
        if self.options.ladder:
            upper = upper_bound(result.clients, backbone, config, test)
            lower = lower_bound(result.clients, backbone, config, test)
            record["upper"] = upper.to_record()
            record["lower"] = lower.to_record()
            write_json(
                {"upper": upper.to_record(), "lower": lower.to_record()}, out_dir / "bounds.json"
            )
        return record

    def _summarize(self, results: list[dict]) -> dict[str, Any]:
        summary: dict[str, Any] = {"seeds": [r["seed"] for r in results], "runs": results}
        for name in LADDER:
            if name not in results[0]:
                continue
            for metric in ("global_acc", "personalized_acc"):
                values = [r[name][metric] for r in results if r[name][metric] is not None]
                if not values:
                    continue
                stats = summarize_seeds(values)
                summary[f"{name}_{metric}"] = stats.to_record()
                print(f"{name:>6} {metric:<17} {stats}")
        return summary

    def _write_ledger(self, fed_config: FedConfig) -> None:
        options = self.options
        psi_count = options.psi_count
        if psi_count is None:
            if self.config.get("backbone"):
                psi_count = film_param_count(self.section(BackboneSpec, "backbone"))
            else:
                psi_count = film_param_count(RESNET50_FILM_LAYOUT)
        bit_payload = options.backbone_params + options.reference_classes * options.embedding_dim

        rows = []
        for method, payload in (("fit", psi_count), ("bit-linear", bit_payload)):
            per_round, overall = communication_cost(
                payload, fed_config.clients_per_round, fed_config.rounds
            )
            rows.append(
                {"method": method, "payload": payload, "per_round": per_round, "overall": overall}
            )
            print(
                f"{method:<11} payload {payload:>12,}  per round {per_round:>15,}  "
                f"overall {overall:>18,}"
            )
        write_json(
            {
                "clients_per_round": fed_config.clients_per_round,
                "rounds": fed_config.rounds,
                "methods": rows,
            },
            self.out_dir / "ledger.json",
        )

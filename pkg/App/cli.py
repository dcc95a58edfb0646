"""
Interface de linha de comando `loopsched`.

Sub-comandos: suggest, tune-sim, report, sim, regret e compare-locality.
Códigos de saída: 0 ok, 2 validação/configuração, 3 falha numérica.
"""

from typing import Sequence
import argparse
import sys
import os

sys.path.append(os.path.dirname(os.path.dirname(os.path.realpath(__file__))))

from App.utils.bo import SURROGATE_LOCALITY, SURROGATE_PLAIN, BOConfig
from App.utils.chart_generator import write_convergence_chart
from App.utils.constants import DEFAULT_N_INIT, DEFAULT_N_ITERS
from App.utils.exceptions import EXIT_OK, ConfigurationError, LoopSchedError
from App.utils.logger import get_logger, set_log_level
from Engine.engine import compare_locality, regret_report, report, simulate, suggest, tune_sim

# Logger para este módulo
logger = get_logger(__name__)


def _add_bo_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--locality", action="store_true", help="Usa o surrogate com localidade (x, ℓ)")
    parser.add_argument("--seed", type=int, default=0, help="Semente do MCMC e das amostras de máximo")
    parser.add_argument("--iters", type=int, default=DEFAULT_N_ITERS, help="Iterações de BO (padrão: 20)")
    parser.add_argument("--init", type=int, default=DEFAULT_N_INIT, help="Pontos iniciais de Sobol (padrão: 4)")
    parser.add_argument("--hp-samples", type=int, default=None, help="Amostras de hiperparâmetros (padrão: 10)")
    parser.add_argument("--mes-samples", type=int, default=None, help="Amostras do valor máximo (padrão: 10)")


def _bo_config(args: argparse.Namespace) -> BOConfig:
    overrides = {}
    if args.hp_samples is not None:
        overrides["hp_samples"] = args.hp_samples
    if args.mes_samples is not None:
        overrides["mes_samples"] = args.mes_samples
    return BOConfig(
        n_init=args.init,
        n_iters=args.iters,
        surrogate=SURROGATE_LOCALITY if args.locality else SURROGATE_PLAIN,
        seed=args.seed,
        **overrides,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loopsched", description="Escalonamento de laços e tuner bayesiano do FSS")
    parser.add_argument("--log-level", default=None, help="Nível do arquivo de log (DEBUG, INFO, ...)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("suggest", help="Executa um passo de BO e grava <loop_id>.next.json")
    p.add_argument("--data", required=True, help="Dataset do laço (<loop_id>.json)")
    _add_bo_arguments(p)

    p = sub.add_parser("tune-sim", help="Laço fechado de BO contra o simulador")
    p.add_argument("--workload", required=True, help="Especificação de carga (JSON)")
    p.add_argument("--out", default=None, help="Diretório para trace.csv, report.json e convergence.html")
    _add_bo_arguments(p)

    p = sub.add_parser("report", help="Resumo de um dataset")
    p.add_argument("--data", required=True, help="Dataset do laço (<loop_id>.json)")
    p.add_argument("--csv", action="store_true", help="Emite iter,x,theta,total_s,best_s")
    p.add_argument("--html", default=None, help="Grava o gráfico de convergência neste arquivo")
    p.add_argument("--no-posterior", action="store_true", help="Não calcula o argmin da média posterior")

    p = sub.add_parser("sim", help="Simula uma política sobre uma carga sintética")
    p.add_argument("--workload", required=True, help="Especificação de carga (JSON)")
    p.add_argument("--schedule", required=True, help="Política (ex.: fss:0.5, fac2, tss:125,1)")
    p.add_argument("--ell", type=int, default=1, help="Índice ℓ da execução simulada")

    p = sub.add_parser("regret", help="Tabela de regret a partir de uma matriz de custos")
    p.add_argument("--in", dest="input", required=True, help="CSV (scheduler,workload,cost) ou JSON")
    p.add_argument("--out", default=None, help="Arquivo de saída (.md ou .csv)")

    p = sub.add_parser("compare-locality", help="Curvas medianas: surrogate simples × com localidade")
    p.add_argument("--workload", required=True, help="Especificação de carga (JSON)")
    p.add_argument("--seeds", type=int, default=30, help="Número de sementes (padrão: 30)")
    p.add_argument("--out", default=None, help="CSV das curvas medianas")
    _add_bo_arguments(p)
    return parser


def _run(args: argparse.Namespace) -> int:
    if args.command == "suggest":
        result = suggest(args.data, _bo_config(args))
        print(result.summary_line())

    elif args.command == "tune-sim":
        result = tune_sim(args.workload, _bo_config(args), args.out)
        print(result.trace.to_csv(index=False, float_format="%.17g", lineterminator="\n"), end="")
        print(
            f"best_theta={result.best_theta:.6g} tuned_total={result.tuned_total:.6g} "
            f"optimal_theta={result.optimal_theta:.6g} optimal_total={result.optimal_total:.6g} "
            f"regret={result.regret:.4f}%"
        )

    elif args.command == "report":
        result = report(args.data, with_posterior=not args.no_posterior)
        print(result.to_csv() if args.csv else result.to_text(), end="\n" if not args.csv else "")
        if args.html and not result.rows.empty:
            write_convergence_chart(result.rows, args.html, title=f"Convergência de {result.loop_id}")

    elif args.command == "sim":
        result = simulate(args.workload, args.schedule, args.ell)
        print(
            f"schedule={result.schedule} ell={result.ell} chunks={len(result.chunks)} "
            f"makespan={result.execution.makespan:.9g} total={result.total:.9g}"
        )

    elif args.command == "regret":
        text = regret_report(args.input, args.out)
        if args.out is None:
            print(text, end="")

    elif args.command == "compare-locality":
        frame = compare_locality(args.workload, _bo_config(args), seeds=args.seeds, out_csv=args.out)
        if args.out is None:
            print(frame.to_csv(index=False, lineterminator="\n"), end="")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Ponto de entrada; devolve o código de saída."""
    args = build_parser().parse_args(argv)
    try:
        if args.log_level:
            try:
                set_log_level(args.log_level)
            except ValueError as e:
                raise ConfigurationError(str(e))
        return _run(args)
    except LoopSchedError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"erro: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())

"""
The `comact` command.

    comact synth     [--config FILE] [--set PATH VALUE]... [--seed S] [--out DIR]
    comact validate  PATH [--lenient]
    comact train     [--config FILE] [--set PATH VALUE]... [--seed S] [--regime R] [--modalities M ...]
                     [--data DIR] [--out DIR] [--name NAME]
    comact eval      RUN [--split S ...] [--data DIR]
    comact fewshot   RUN [--modality M] [--shots K ...] [--data DIR]
    comact export    RUN --kind {embeddings,attention,plots} [--modality M] [--other M] [--split S]
                     [--sequences ID ...] [--data DIR]
    comact oracle    [--config FILE] [--set PATH VALUE]... [--data DIR]

Results are printed to stdout as JSON. Configuration, validation and input errors print
{"error": <exception class>, "message": ..., "command": ...} to stderr and exit with status 2;
`validate` exits with status 1 when the dataset has violations.
"""

import argparse
import json
import logging
import os
import sys
from parameters import ParameterSet
import comact
from comact.tools.parametrization import load_parameters, parse_override_value
from comact.controller import setup_run, init_logging

logger = comact.getComactLogger()


def _overrides(args, flags):
    """
    The dotted overrides of --set pairs and of the dedicated flags (flag attribute -> parameter path).
    """
    modified = {path: parse_override_value(value) for path, value in (args.set or [])}
    for attribute, path in flags.items():
        value = getattr(args, attribute, None)
        if value is not None:
            modified[path] = value
    return modified


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=1, sort_keys=True) + '\n')


def _open_run_dataset(args):
    from comact.storage.datastore import open_run
    from comact.homage.dataset import ActivityDataset
    store = open_run(args.run)
    parameters = store.load_parameters()
    if getattr(args, 'data', None):
        parameters.replace_values(**{'data.path': args.data})
    return store, parameters, ActivityDataset(parameters.data)


def cmd_synth(args):
    from comact.synth import SynthConfig, generate_dataset, oracle_accuracy
    modified = _overrides(args, {'seed': 'synth.seed', 'out': 'data.path'})
    parameters = load_parameters(args.config, modified)
    config = SynthConfig(parameters.synth)
    scripts = generate_dataset(config, parameters.data.path)
    p = config.parameters
    test = scripts[p.n_train:]
    result = {'directory': parameters.data.path, 'n_sequences': len(scripts), 'fingerprint': config.fingerprint()}
    if test:
        result['oracle_accuracy'] = oracle_accuracy(config, test)
        result['oracle_accuracy_per_modality'] = {m: oracle_accuracy(config, test, [m]) for m in p.modalities}
    _emit(result)
    return 0


def cmd_validate(args):
    from comact.homage.io import parse_annotations
    _, _, report = parse_annotations(args.path, strict=not args.lenient)
    _emit(report.as_dict())
    return 0 if report.ok else 1


def cmd_train(args):
    from comact.training import train
    modified = _overrides(args, {'seed': 'seed', 'regime': 'train.regime', 'modalities': 'train.modalities',
                                 'data': 'data.path'})
    parameters = load_parameters(args.config, modified)
    datastore = setup_run(parameters, modified, out=args.out, run_name=args.name)
    state = train(parameters, datastore)
    _emit({'run': datastore.root, 'regime': state.regime.name, 'steps': state.step,
           'metrics': [r.as_record() for r in state.reports]})
    return 0


def cmd_eval(args):
    from comact.analysis.evaluation import Evaluation
    store, parameters, dataset = _open_run_dataset(args)
    init_logging(None, console_level=logging.INFO)
    model, description = store.load_model()
    splits = args.split or list(parameters.eval.splits)
    evaluation = Evaluation(store, model, dataset, description['regime'],
                            ParameterSet({'splits': splits, 'batch_size': parameters.eval.batch_size}))
    _emit([r.as_record() for r in evaluation.analyse()])
    return 0


def cmd_fewshot(args):
    from comact.analysis.fewshot import FewShotProtocol
    store, parameters, dataset = _open_run_dataset(args)
    init_logging(None, console_level=logging.INFO)
    model, description = store.load_model()
    fp = parameters.eval.fewshot.as_dict()
    if args.shots:
        fp['shots'] = list(args.shots)
    protocol = FewShotProtocol(store, model, dataset, description['regime'], ParameterSet(fp), parameters.eval.batch_size)
    results = []
    for m in ([args.modality] if args.modality else model.modalities):
        results += protocol.analyse(m)
    _emit([r.as_record() for r in results])
    return 0


def cmd_export(args):
    from comact.analysis.exports import export_embeddings, export_attention_maps
    from comact.visualization.plotting import EmbeddingProjectionPlot, LossCurvePlot, FewShotCurvePlot
    store, parameters, dataset = _open_run_dataset(args)
    init_logging(None, console_level=logging.INFO)
    model, description = store.load_model()
    modalities = [args.modality] if args.modality else model.modalities
    split = args.split or parameters.eval.splits[0]
    written = []

    if args.kind == 'embeddings':
        for m in modalities:
            path = store.path('embeddings_%s_%s.tsv' % (m, split))
            export_embeddings(model, dataset, m, split, path, parameters.eval.batch_size)
            written.append(path)
    elif args.kind == 'attention':
        anchor = args.modality or modalities[0]
        other = args.other or [m for m in model.modalities if m != anchor][0]
        sequences = dataset.sequences_of(split)
        if args.sequences:
            sequences = [s for s in sequences if s.sequence_id in set(args.sequences)]
        sequences = sequences[:parameters.eval['export'].max_sequences]
        written += export_attention_maps(model, dataset, anchor, other, sequences, store.path('attention'))
    else:
        for m in modalities:
            path = store.path('embeddings_%s_%s.tsv' % (m, split))
            if not os.path.isfile(path):
                export_embeddings(model, dataset, m, split, path, parameters.eval.batch_size)
            plot = EmbeddingProjectionPlot(store, ParameterSet({'embeddings': path, 'perplexity': parameters.eval['export'].perplexity,
                                                                'seed': parameters.seed}),
                                           plot_file_name='tsne_%s_%s.png' % (m, split))
            written.append(plot.plot())
        if store.read_history():
            written.append(LossCurvePlot(store, ParameterSet({}), plot_file_name='loss.png').plot())
        if store.get_analysis_result(identifier='FewShotResult'):
            written.append(FewShotCurvePlot(store, ParameterSet({}), plot_file_name='fewshot.png').plot())
    _emit({'kind': args.kind, 'files': written})
    return 0


def cmd_oracle(args):
    from comact.homage.dataset import ActivityDataset
    from comact.training.scene_graph_oracle import train_scene_graph_oracle
    modified = _overrides(args, {'data': 'data.path'})
    parameters = load_parameters(args.config, modified)
    init_logging(None, console_level=logging.INFO)
    dataset = ActivityDataset(parameters.data)
    _, accuracies = train_scene_graph_oracle(dataset, parameters.eval.oracle, seed=parameters.seed)
    _emit(accuracies)
    return 0


def _add_config_arguments(parser):
    parser.add_argument('--config', default=None, help='parameter file (the comact defaults if omitted)')
    parser.add_argument('--set', nargs=2, action='append', metavar=('PATH', 'VALUE'),
                        help='override a dotted parameter path with a python literal, e.g. --set train.lr 0.01')


def build_parser():
    parser = argparse.ArgumentParser(prog='comact', description='Cooperative compositional training of multi-modal action encoders.')
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    p = sub.add_parser('synth', help='generate the synthetic benchmark')
    _add_config_arguments(p)
    p.add_argument('--seed', type=int)
    p.add_argument('--out', help='dataset directory (data.path)')
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser('validate', help='validate an annotation directory')
    p.add_argument('path')
    p.add_argument('--lenient', action='store_true', help='collect malformed records instead of stopping at the first')
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser('train', help='train a regime')
    _add_config_arguments(p)
    p.add_argument('--seed', type=int)
    p.add_argument('--regime', choices=['SM', 'CT', 'SKD', 'CKD', 'SS', 'SS+SV'])
    p.add_argument('--modalities', nargs='+')
    p.add_argument('--data', help='dataset directory (data.path)')
    p.add_argument('--out', help='run directory')
    p.add_argument('--name', help='run name used in the generated run directory name')
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('eval', help='single-modality evaluation of a run')
    p.add_argument('run')
    p.add_argument('--split', nargs='+', choices=['train', 'test1', 'test2'])
    p.add_argument('--data')
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('fewshot', help='few-shot protocol on the frozen encoders of a run')
    p.add_argument('run')
    p.add_argument('--modality')
    p.add_argument('--shots', nargs='+', type=int)
    p.add_argument('--data')
    p.set_defaults(func=cmd_fewshot)

    p = sub.add_parser('export', help='export embeddings, attention maps or plots of a run')
    p.add_argument('run')
    p.add_argument('--kind', required=True, choices=['embeddings', 'attention', 'plots'])
    p.add_argument('--modality')
    p.add_argument('--other', help='the second modality of the attention pair')
    p.add_argument('--split', choices=['train', 'test1', 'test2'])
    p.add_argument('--sequences', nargs='+')
    p.add_argument('--data')
    p.set_defaults(func=cmd_export)

    p = sub.add_parser('oracle', help='activity classification from ground-truth scene graphs')
    _add_config_arguments(p)
    p.add_argument('--data')
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError) as e:
        sys.stderr.write(json.dumps({'error': e.__class__.__name__, 'message': str(e), 'command': args.command}) + '\n')
        return 2


if __name__ == '__main__':
    sys.exit(main())

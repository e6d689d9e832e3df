"""
This module implements the data storage functionality: everything a run produces lives in one
run directory owned by a :class:`.RunDataStore`.

Files of a run directory::

    parameters                  resolved configuration snapshot (ParameterSet text)
    modified_parameters.json    the values that were overridden on the command line
    checkpoint.pt               model state_dict, optimizer state, step and model description
    checkpoint_manifest.json    {qualified parameter name: shape} of the checkpointed model
    history.jsonl               one record per logged training step
    metrics.jsonl               one record per evaluation (regime, modality, split)
    fewshot.json                few-shot table
    summary.json                final summary of the run
    analysis.pickle             the analysis data structures of the store
    log                         the run log
"""

import json
import os
import pickle
import torch
from parameters import ParameterSet
import comact
from comact.core import ParametrizedObject, ConfigurationError
from comact.tools.comact_parametrized import filter_query
from comact.tools.parametrization import ComactParameterSet

logger = comact.getComactLogger()

PARAMETERS_FILE = 'parameters'
MODIFIED_PARAMETERS_FILE = 'modified_parameters.json'
CHECKPOINT_FILE = 'checkpoint.pt'
MANIFEST_FILE = 'checkpoint_manifest.json'
HISTORY_FILE = 'history.jsonl'
METRICS_FILE = 'metrics.jsonl'
FEWSHOT_FILE = 'fewshot.json'
SUMMARY_FILE = 'summary.json'
ANALYSIS_FILE = 'analysis.pickle'


class RunDataStore(ParametrizedObject):
    """
    The data store of a single run.

    Analysis results are :class:`comact.analysis.data_structures.AnalysisDataStructure` objects, addressed
    by the values of their parameters (see :func:`.get_analysis_result`).

    Parameters
    ----------
    load : bool
         Whether to load the analysis results already saved in the run directory.
    parameters : ParameterSet
               The required parameter set.
    replace : bool
            Whether adding an analysis result equal in parametrization to a stored one replaces it
            (otherwise it is an error).

    Other parameters
    ----------------
    root_directory : str
                   The run directory. It is created if it does not exist.
    """

    required_parameters = ParameterSet({
        'root_directory': str,
    })

    def __init__(self, load, parameters, replace=True):
        ParametrizedObject.__init__(self, parameters)
        self.replace = replace
        self.analysis_results = []
        os.makedirs(self.parameters.root_directory, exist_ok=True)
        if load:
            self.load()

    @property
    def root(self):
        return self.parameters.root_directory

    def path(self, *names):
        return os.path.join(self.root, *names)

    def load(self):
        if os.path.isfile(self.path(ANALYSIS_FILE)):
            with open(self.path(ANALYSIS_FILE), 'rb') as f:
                self.analysis_results = pickle.load(f)
        else:
            self.analysis_results = []

    def save(self):
        """
        Writes the analysis results: the pickle holding the data structures, and their metrics.jsonl
        and fewshot.json renderings, sorted so that the files depend only on the stored results.
        """
        with open(self.path(ANALYSIS_FILE), 'wb') as f:
            pickle.dump(self.analysis_results, f)

        metrics = sorted((ads.as_record() for ads in self.get_analysis_result(identifier='MetricReport')),
                         key=lambda r: (r['regime'] or '', r['modality'] or '', r['split'] or ''))
        with open(self.path(METRICS_FILE), 'w') as f:
            for record in metrics:
                f.write(json.dumps(record, sort_keys=True) + '\n')

        fewshot = sorted((ads.as_record() for ads in self.get_analysis_result(identifier='FewShotResult')),
                         key=lambda r: (r['modality'] or '', r['k']))
        if fewshot:
            self.write_json(FEWSHOT_FILE, fewshot)

    def add_analysis_result(self, result):
        """
        Add analysis results to data store. If there already exists ADS in the data store with the same
        parametrization it is replaced, or an error is raised if the store was created with replace=False.
        """
        for i, ads in enumerate(self.analysis_results):
            if result.equalParams(ads):
                if self.replace:
                    logger.info("Replacing ADS with the same parametrization: %s" % str(result))
                    self.analysis_results[i] = result
                    return
                raise ValueError("Analysis Data Structure with the same parametrization already added in the datastore: %s" % str(result))
        self.analysis_results.append(result)

    def get_analysis_result(self, **kwargs):
        """
        Return a list of ADSs that match the parameter values specified in kwargs.

        Examples
        --------
        >>> datastore.get_analysis_result(identifier='MetricReport', modality='ego_rgb', split=['test1', 'test2'])
        """
        return filter_query(self.analysis_results, **kwargs)

    # parameters

    def save_parameters(self, parameters, modified_parameters=None):
        parameters.save(self.path(PARAMETERS_FILE), expand_urls=True)
        self.write_json(MODIFIED_PARAMETERS_FILE, dict(modified_parameters or {}))

    def load_parameters(self):
        if not os.path.isfile(self.path(PARAMETERS_FILE)):
            raise FileNotFoundError("No configuration snapshot in %s" % self.root)
        return ComactParameterSet(self.path(PARAMETERS_FILE))

    # checkpoints

    def has_checkpoint(self):
        return os.path.isfile(self.path(CHECKPOINT_FILE))

    def save_checkpoint(self, model, description, optimizer=None, step=0):
        """
        Saves the model parameters with its manifest.

        Parameters
        ----------
        model : CooperativeModel
        description : dict
                    What is needed to rebuild the model: modalities, vocabulary, attention, attention_temperature
                    and the training regime.
        optimizer : torch.optim.Optimizer
        step : int
        """
        state = model.state_dict()
        torch.save({'model': state, 'optimizer': None if optimizer is None else optimizer.state_dict(),
                    'step': step, 'description': description}, self.path(CHECKPOINT_FILE))
        self.write_json(MANIFEST_FILE, {name: list(t.shape) for name, t in state.items()})
        logger.info("Saved checkpoint of %d tensors at step %d to %s" % (len(state), step, self.path(CHECKPOINT_FILE)))

    def load_checkpoint(self, model=None):
        """
        Loads the checkpoint archive. If `model` is given its parameters are restored after the archive
        was verified against the manifest and against the model.
        """
        if not self.has_checkpoint():
            raise FileNotFoundError("No checkpoint in %s" % self.root)
        archive = torch.load(self.path(CHECKPOINT_FILE), map_location='cpu')
        manifest = self.read_json(MANIFEST_FILE)
        stored = {name: list(t.shape) for name, t in archive['model'].items()}
        if stored != manifest:
            raise ValueError("Checkpoint %s does not match its manifest" % self.path(CHECKPOINT_FILE))
        if model is not None:
            expected = {name: list(t.shape) for name, t in model.state_dict().items()}
            if expected != manifest:
                missing = sorted(set(expected) ^ set(manifest))
                wrong = sorted(k for k in set(expected) & set(manifest) if expected[k] != manifest[k])
                raise ValueError("Checkpoint does not fit the model: differing names %s, differing shapes %s" % (missing[:5], wrong[:5]))
            model.load_state_dict(archive['model'])
        return archive

    def load_model(self, modalities=None):
        """
        Rebuilds the model of the run from its configuration snapshot and checkpoint.

        Parameters
        ----------
        modalities : list
                   Restrict the rebuilt model to these modalities (their stacks are taken from the checkpoint).

        Returns
        -------
        model : CooperativeModel
              In eval mode.
        description : dict
        """
        from comact.models import ModelConfig
        parameters = self.load_parameters()
        archive = self.load_checkpoint()
        description = archive['description']
        stored = description['modalities']
        modalities = stored if modalities is None else list(modalities)
        unknown = [m for m in modalities if m not in stored]
        if unknown:
            raise ConfigurationError("Run %s has no encoder for %s (has %s)" % (self.root, unknown, stored))
        model = ModelConfig(parameters.model).build(modalities, description['vocabulary'],
                                                    attention=description['attention'],
                                                    attention_temperature=description['attention_temperature'])
        own = model.state_dict()
        state = {k: v for k, v in archive['model'].items() if k in own}
        missing = sorted(set(own) - set(state))
        if missing:
            raise ValueError("Checkpoint of %s lacks %s" % (self.root, missing[:5]))
        model.load_state_dict(state)
        model.eval()
        return model, description

    # json records

    def append_history(self, record):
        with open(self.path(HISTORY_FILE), 'a') as f:
            f.write(json.dumps(record, sort_keys=True) + '\n')

    def read_history(self):
        return self.read_jsonl(HISTORY_FILE)

    def reset_history(self):
        if os.path.isfile(self.path(HISTORY_FILE)):
            os.remove(self.path(HISTORY_FILE))

    def read_metrics(self):
        return self.read_jsonl(METRICS_FILE)

    def write_summary(self, summary):
        self.write_json(SUMMARY_FILE, summary)

    def read_summary(self):
        return self.read_json(SUMMARY_FILE)

    def write_json(self, name, obj):
        full = self.path(name)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        with open(full, 'w') as f:
            json.dump(obj, f, indent=1, sort_keys=True)

    def read_json(self, name):
        with open(self.path(name)) as f:
            return json.load(f)

    def read_jsonl(self, name):
        if not os.path.isfile(self.path(name)):
            return []
        with open(self.path(name)) as f:
            return [json.loads(line) for line in f if line.strip()]


def open_run(directory, load=True):
    """
    Opens an existing run directory.
    """
    if not os.path.isdir(directory):
        raise FileNotFoundError("No run directory at %s" % directory)
    return RunDataStore(load, ParameterSet({'root_directory': directory}))

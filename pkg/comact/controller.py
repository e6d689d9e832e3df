"""
This is the nexus of workflow execution control of *comact*: run directory creation, configuration
snapshots and logging set-up shared by the command line subcommands.
"""
import logging
import os
from datetime import datetime
from parameters import ParameterSet
import comact
from comact.storage.datastore import RunDataStore

logger = comact.getComactLogger()

HEADER = 25
logging.addLevelName(HEADER, 'HEADER')

RUN_ROOT_VARIABLE = 'COMACT_RUN_ROOT'


class FancyFormatter(logging.Formatter):
    """
    A log formatter that indents the log message depending on the level.
    """

    DEFAULT_INDENTS = {
        'CRITICAL': "",
        'ERROR': "",
        'WARNING': "",
        'HEADER': "",
        'INFO': "  ",
        'DEBUG': "    ",
    }

    def __init__(self, fmt=None, datefmt=None):
        logging.Formatter.__init__(self, fmt, datefmt)
        self._indents = FancyFormatter.DEFAULT_INDENTS

    def format(self, record):
        s = logging.Formatter.format(self, record)
        if record.levelname == "HEADER":
            s = "=== %s ===" % s
        return self._indents.get(record.levelname, "") + s


def init_logging(filename, file_level=logging.INFO, console_level=logging.WARNING):
    """
    Logs to `filename` (if not None) and to the console. Handlers installed by earlier calls are replaced.
    """
    root = logging.getLogger('')
    for handler in list(root.handlers):
        if getattr(handler, '_comact', False):
            root.removeHandler(handler)
            handler.close()
    root.setLevel(min(file_level, console_level))
    if filename is not None:
        file_handler = logging.FileHandler(filename, mode='w')
        file_handler.setLevel(file_level)
        file_handler.setFormatter(logging.Formatter('%(asctime)s %(name)-10s %(levelname)-6s %(message)s [%(pathname)s:%(lineno)d]'))
        file_handler._comact = True
        root.addHandler(file_handler)
    console = logging.StreamHandler()
    console.setLevel(console_level)
    console.setFormatter(FancyFormatter('%(message)s'))
    console._comact = True
    root.addHandler(console)
    return console


def result_directory_name(run_name, regime, modified_parameters):
    """
    <regime>_<run name>_____<sorted overrides>, overrides shortened to their last path component when long.
    """
    keys = [k for k in sorted(modified_parameters) if k not in ('results_dir', 'train.regime')]
    modified = '_'.join('%s:%s' % (k, modified_parameters[k]) for k in keys)
    if len(modified) > 100:
        modified = '_'.join('%s:%s' % (k.split('.')[-1], modified_parameters[k]) for k in keys)
    name = '%s_%s_____%s' % (regime, run_name, modified)
    return name.replace('/', '-').replace(' ', '').replace("'", '')


def run_root(parameters):
    """
    The directory runs are created under: $COMACT_RUN_ROOT, or `results_dir` of the configuration.
    """
    return os.environ.get(RUN_ROOT_VARIABLE) or parameters.results_dir


def setup_run(parameters, modified_parameters, out=None, run_name=None):
    """
    Creates the run directory, stores the configuration snapshot and starts logging into <run>/log.

    Parameters
    ----------
    parameters : ComactParameterSet
               The resolved configuration.
    modified_parameters : dict
                        The dotted overrides applied to the configuration file.
    out : str
        The run directory; derived from :func:`.result_directory_name` under :func:`.run_root` if None.
    run_name : str
             Defaults to a timestamp.

    Returns
    -------
    RunDataStore
    """
    if out is None:
        run_name = run_name or datetime.now().strftime('%Y%m%d-%H%M%S')
        out = os.path.join(run_root(parameters), result_directory_name(run_name, parameters.train.regime, modified_parameters))
    datastore = RunDataStore(False, ParameterSet({'root_directory': out}))
    datastore.save_parameters(parameters, modified_parameters)
    init_logging(datastore.path('log'), file_level=logging.INFO, console_level=logging.INFO)
    logger.log(HEADER, "Run directory %s" % out)
    return datastore

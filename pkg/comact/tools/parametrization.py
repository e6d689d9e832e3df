"""
This module contains code interfacing the parameters package: loading of configuration files,
command line overrides and the comact default configuration.
"""

import ast
import os
import numpy
from parameters import ParameterSet, ParameterRange, ParameterReference

DEFAULTS_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'param', 'defaults')


def load_parameters(parameter_url, modified_parameters=None):
    """
    A simple function for loading parameters that replaces the values in *modified_parameters* in the loaded parameters
    and subsequently expands references.

    Parameters
    ----------
    parameter_url : str
                  Path to a parameters file. If None the comact defaults are loaded.

    modified_parameters : dict
                        Dotted parameter paths (e.g. 'train.lr') and the values they should be set to.
    """
    parameters = ComactParameterSet(parameter_url if parameter_url is not None else DEFAULTS_PATH)
    if modified_parameters:
        for path in modified_parameters:
            _check_path(parameters, path)
        parameters.replace_values(**modified_parameters)
    parameters.replace_references()
    return parameters


def _check_path(parameters, path):
    node = parameters
    for key in path.split('.'):
        if not isinstance(node, ParameterSet) or key not in node:
            raise KeyError("Unknown parameter path %s" % path)
        node = node[key]


def parse_override_value(value):
    """
    Command line values are interpreted as python literals when possible ('0.1', '[1, 5]', 'None'),
    otherwise they are kept as strings.
    """
    try:
        return ast.literal_eval(value)
    except (ValueError, SyntaxError):
        return value


class ComactParameterSet(ParameterSet):
    """
    This is an extension to `ParameterSet` class which reads local files directly
    and evaluates them in a namespace that knows the comact parameter helpers.
    """

    @staticmethod
    def read_from_str(s, update_namespace=None):
        global_dict = dict(ref=ParameterReference, ParameterSet=ParameterSet,
                           ParameterRange=ParameterRange, pi=numpy.pi)
        if update_namespace:
            global_dict.update(update_namespace)

        D = None
        try:
            D = eval(s, global_dict)
        except SyntaxError as e:
            raise SyntaxError("Invalid string for ParameterSet definition: %s\n%s" % (s, e))
        except NameError as e:
            raise NameError("%s\n%s" % (s, e))

        return D or {}

    def __init__(self, initialiser, label=None, update_namespace=None):
        if isinstance(initialiser, str):
            if os.path.exists(initialiser):
                with open(initialiser) as f:
                    pstr = f.read()
            else:
                pstr = initialiser
            initialiser = ComactParameterSet.read_from_str(pstr, update_namespace)
        ParameterSet.__init__(self, initialiser, label=label)

"""
This module contains extension of the `param <https://param.holoviz.org/>`_ package,
and a collection of functions that allow for filtering of sets of :class:`.ComactParametrized`
instances based on the values of their parameters.

When parametrizing *comact* result objects we allow only SNumber, SInteger and SString parameters.
These are extensions of the corresponding param parameters that automatically allow None values
and are instantiated per object.
"""

import collections
import importlib
import numbers
import numpy
from param.parameterized import Parameterized
from param import Number, Integer, String
import comact

logger = comact.getComactLogger()


class SNumber(Number):
    """
    A comact parameter that can hold a number. For the full range of options refer to the `Number`
    class of the param package.
    """

    def __init__(self, **params):
        params.setdefault('default', None)
        super(SNumber, self).__init__(allow_None=True, instantiate=True, **params)


class SInteger(Integer):
    """
    A comact parameter that can hold an integer.
    """

    def __init__(self, **params):
        params.setdefault('default', None)
        super(SInteger, self).__init__(allow_None=True, instantiate=True, **params)


class SString(String):
    """
    A comact parameter that can hold a string.
    """

    def __init__(self, **params):
        params.setdefault('default', None)
        super(SString, self).__init__(allow_None=True, instantiate=True, **params)


class ComactParametrized(Parameterized):
    """
    We extend the param Parameterized class to constrain the parametrization to the
    trio SNumber, SInteger, SString.

    The parameter values form the identity of an object: two objects with equal parameter
    values describe the same result. This is what the data store and the query functions
    below rely on.
    """

    name = SString(doc="String identifier for this object that is set to its class name DO NOT TOUCH!")

    _module_cache = {}

    def __init__(self, **params):
        Parameterized.__init__(self, **params)
        self.module_path = type(self).__module__
        self.name = self.__class__.__name__

        for name, o in self.param.objects('existing').items():
            if not isinstance(o, (SNumber, SInteger, SString)):
                raise ValueError("The parameter %s is not of type SNumber or SInteger or SString but of type %s." % (name, type(o)))

    def getParams(self):
        """
        Returns the dictionary of parameter names and their values, sorted by name.
        In comact all comparison and filtering operations should be done based on this.
        """
        return collections.OrderedDict(sorted(self.param.values().items()))

    def getParamValue(self, name):
        return getattr(self, name)

    def equalParams(self, other):
        """
        Returns True if self and other have the same parameters and all their values match.
        """
        return type(self) is type(other) and self.getParams() == other.getParams()

    def __str__(self):
        """
        Stores ONLY the names and values of each parameter and the module path of the class.
        """
        settings = ['"%s":%s' % (name, repr(val)) for name, val in self.getParams().items()]
        return '{"module_path":"%s", ' % self.module_path + ", ".join(settings) + "}"

    def __repr__(self):
        param_str = "\n".join(['   "%s":%s' % (name, repr(val)) for name, val in self.getParams().items()])
        return self.__class__.__name__ + "\n" + param_str + "\n"

    @classmethod
    def idd(cls, obj):
        """
        Restores a 'shell' object out of the string produced by :meth:`__str__`. The returned object is of
        the same type as the original and holds all its parameters, BUT IS NOT INITIALIZED beyond that,
        so it should only be used for examining its parameters.

        If given a :class:`.ComactParametrized` instance it is converted into the shell object.
        """
        if isinstance(obj, ComactParametrized):
            return ComactParametrized.idd(str(obj))
        assert isinstance(obj, str), "The object passed to the idd class method is not string: %s" % type(obj)

        params = eval(obj)
        name = params.pop("name")
        module_path = params.pop("module_path")

        if (module_path, name) not in ComactParametrized._module_cache:
            ComactParametrized._module_cache[(module_path, name)] = getattr(importlib.import_module(module_path), name)
        klass = ComactParametrized._module_cache[(module_path, name)]

        obj = klass.__new__(klass)
        ComactParametrized.__init__(obj, **params)
        return obj


def filter_query(object_list, extra_data_list=None, allow_non_existent_parameters=False, **kwargs):
    """
    Returns a subset of `object_list` containing ComactParametrized instances (and associated data if
    `extra_data_list` is not None) for which the parameters in kwargs match.

    Parameters
    ----------
    object_list : list(ComactParametrized)
                The list of objects to filter.

    extra_data_list : list(object)
                    Values corresponding to objects in object_list. The same subset is returned.

    allow_non_existent_parameters : bool
                                    If True objects missing some of the parameters listed in kwargs are kept
                                    as long as the remaining parameters match.

    \\*\\*kwargs : dict
             The parameter names and values that have to match. A list value matches any of its elements.

    Returns
    -------
    The matching subset of `object_list`, or a tuple (objects, data) if `extra_data_list` was given.
    """
    no_data = extra_data_list is None
    if no_data:
        extra_data_list = [None] * len(object_list)
    elif len(extra_data_list) != len(object_list):
        raise ValueError("filter_query: object and data lists differ in length")

    def matches(x):
        params = x.getParams()
        if not allow_non_existent_parameters and not set(kwargs) <= set(params):
            return False
        for k in set(kwargs) & set(params):
            if isinstance(kwargs[k], list):
                if x.getParamValue(k) not in kwargs[k]:
                    return False
            elif kwargs[k] != x.getParamValue(k):
                return False
        return True

    kept = [(o, d) for o, d in zip(object_list, extra_data_list) if matches(o)]
    if no_data:
        return [o for o, _ in kept]
    return [o for o, _ in kept], [d for _, d in kept]


def identical_parametrized_object_params(parametrized_objects):
    """
    True if all objects in `parametrized_objects` have the same set of parameters (not values!).
    """
    return all(set(o.getParams()) == set(parametrized_objects[0].getParams()) for o in parametrized_objects)


def varying_parameters(parametrized_objects):
    """
    Returns the list of parameters that take at least two different values within `parametrized_objects`.
    Only applicable to lists of objects sharing the same parameters.
    """
    if not identical_parametrized_object_params(parametrized_objects):
        raise ValueError("varying_parameters: accepts only ComactParametrized lists with the same parameters")

    varying = []
    first = parametrized_objects[0]
    for n in first.getParams():
        for o in parametrized_objects:
            a, b = o.getParamValue(n), first.getParamValue(n)
            if isinstance(a, numbers.Number) and isinstance(b, numbers.Number):
                differ = not numpy.isclose(a, b)
            else:
                differ = a != b
            if differ:
                varying.append(n)
                break
    return varying


def colapse_to_dictionary(value_list, parametrized_objects, parameter_name):
    """
    Colapse out a parameter `parameter_name` of a list of `ComactParametrized` instances.

    Parameters
    ----------
    value_list : list
               The values that correspond to the instances in `parametrized_objects`.

    parametrized_objects : list
                         The list of `ComactParametrized` instances.

    parameter_name : str
                   The parameter against which to colapse.

    Returns
    -------
    D : dict
      The keys are the ids of `parametrized_objects` with `parameter_name` colapsed out (set to None).
      The values are tuples of lists (keys, values): the values `parameter_name` had and the
      corresponding entries of `value_list`.
    """
    if len(value_list) != len(parametrized_objects):
        raise ValueError("colapse_to_dictionary: value and object lists differ in length")
    d = collections.OrderedDict()
    for (v, s) in zip(value_list, parametrized_objects):
        s = ComactParametrized.idd(s)
        val = s.getParamValue(parameter_name)
        setattr(s, parameter_name, None)
        a, b = d.setdefault(str(s), ([], []))
        a.append(val)
        b.append(v)
    return d

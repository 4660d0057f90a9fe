# Copyright (C) 2024 Charles O. Goddard
#
# This software is free software: you can redistribute it and/or
# modify it under the terms of the GNU Lesser General Public License as
# published by the Free Software Foundation, either version 3 of the
# License, or (at your option) any later version.
#
# This software is distributed in the hope that it will be useful, but
# WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE. See the GNU
# Lesser General Public License for more details.
#
# You should have received a copy of the GNU Lesser General Public License
# along with this program. If not, see http://www.gnu.org/licenses/.
"""
Stage graph for the crack inspection pipeline.

A scene run is a small DAG whose stages pass rasters, graphs and plans
downstream. Each stage is a `Task`; the `Executor` orders them, runs each one
once and hands back the values of the requested targets.
"""

import logging
import time
from abc import ABC, abstractmethod
from typing import Any, Dict, Iterator, List, Optional, Set, Tuple

import networkx
import tqdm
from pydantic import BaseModel
from typing_extensions import Generic, TypeVar

ValueT = TypeVar("ValueT")


class Task(ABC, BaseModel, Generic[ValueT], frozen=True):
    """One pipeline stage.

    Tasks are frozen, so two stages built from equal inputs compare and hash
    equal and end up as a single node of the graph.
    """

    @abstractmethod
    def arguments(self) -> Dict[str, "Task"]:
        """Upstream stages, keyed by the keyword `execute` receives them under."""
        ...

    @abstractmethod
    def execute(self, **kwargs) -> ValueT: ...

    def priority(self) -> int:
        """Among ready stages, higher priority runs first."""
        return 0

    def group_label(self) -> Optional[str]:
        return None

    def stage_name(self) -> str:
        return type(self).__name__


def _schedule_key(task: Task) -> Tuple[str, int, str]:
    return (task.group_label() or "", -task.priority(), task.stage_name())


class Executor:
    """Runs a set of target stages together with everything they depend on.

    A value is kept only while a stage that has not run yet still consumes it
    (targets are yielded first). Wall time per stage type is summed into
    `timings`.
    """

    targets: List[Task]
    schedule: List[Task]
    dependencies: Dict[Task, Set[Task]]
    timings: Dict[str, float]

    def __init__(self, tasks: List[Task]):
        self.targets = tasks
        self.timings = {}
        self.schedule = self._make_schedule(tasks)

    def run(self, quiet: bool = False) -> Iterator[Tuple[Task, Any]]:
        """Execute the schedule, yielding `(task, value)` for every target."""
        consumers: Dict[Task, int] = {task: 0 for task in self.schedule}
        for task in self.schedule:
            for dep in self.dependencies[task]:
                consumers[dep] += 1
        targets = set(self.targets)

        values: Dict[Task, Any] = {}
        pbar = tqdm.tqdm(self.schedule, disable=quiet, desc="Pipeline stages")
        for task in pbar:
            name = task.stage_name()
            pbar.set_postfix_str(name, refresh=False)

            kwargs = {key: values[dep] for key, dep in task.arguments().items()}
            start = time.perf_counter()
            values[task] = task.execute(**kwargs)
            elapsed = time.perf_counter() - start
            self.timings[name] = self.timings.get(name, 0.0) + elapsed
            logging.debug(f"{name} finished in {elapsed:.3f}s")
            del kwargs

            if task in targets:
                yield task, values[task]

            for dep in self.dependencies[task]:
                consumers[dep] -= 1
                if consumers[dep] == 0:
                    del values[dep]
            if consumers[task] == 0:
                del values[task]

    def execute(self) -> None:
        """Run every stage and discard the results."""
        for _ in self.run(quiet=True):
            pass

    def _make_schedule(self, targets: List[Task]) -> List[Task]:
        self.dependencies = self._build_dependencies(targets)

        graph = networkx.DiGraph()
        graph.add_nodes_from(self.dependencies)
        graph.add_edges_from(
            (dep, task) for task, deps in self.dependencies.items() for dep in deps
        )
        # raises NetworkXUnfeasible on a cycle
        return list(networkx.lexicographical_topological_sort(graph, key=_schedule_key))

    def _build_dependencies(self, targets: List[Task]) -> Dict[Task, Set[Task]]:
        dependencies: Dict[Task, Set[Task]] = {}
        stack = list(targets)
        while stack:
            task = stack.pop()
            if task in dependencies:
                continue
            dependencies[task] = set(task.arguments().values())
            stack.extend(dependencies[task])
        return dependencies

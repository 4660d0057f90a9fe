from typing import Any, Dict, Optional, Tuple

import networkx
import pytest

from crackkit.graph import Executor, Task

EXECUTION_COUNTS: Dict[Task, int] = {}


class DummyTask(Task):
    result: Any
    dependencies: Tuple[Tuple[str, Task], ...] = ()
    name: str = "DummyTask"
    grouplabel: Optional[str] = None

    def arguments(self):
        return dict(self.dependencies)

    def group_label(self) -> Optional[str]:
        return self.grouplabel

    def execute(self, **kwargs):
        EXECUTION_COUNTS[self] = EXECUTION_COUNTS.get(self, 0) + 1
        return self.result


class SumTask(Task[int]):
    inputs: Tuple[Task, ...]

    def arguments(self):
        return {f"x{idx}": task for idx, task in enumerate(self.inputs)}

    def execute(self, **kwargs) -> int:
        return sum(kwargs.values())


class UrgentTask(Task[int]):
    result: int

    def arguments(self):
        return {}

    def execute(self) -> int:
        return self.result

    def priority(self) -> int:
        return 10


def create_mock_task(name, result=None, dependencies=None, group_label=None):
    if dependencies is None:
        dependencies = {}
    return DummyTask(
        result=result,
        dependencies=tuple(sorted(dependencies.items())),
        name=name,
        grouplabel=group_label,
    )


class TestTaskClass:
    def test_task_defaults(self):
        task = create_mock_task("task1", result=42)
        assert task.execute() == 42
        assert task.priority() == 0
        assert task.group_label() is None
        assert task.stage_name() == "DummyTask"

    def test_equal_tasks_are_one_node(self):
        a = create_mock_task("same", result=1)
        b = create_mock_task("same", result=1)
        assert a == b and hash(a) == hash(b)


class TestExecutorClass:
    def test_executor_empty_list(self):
        assert list(Executor([]).run(quiet=True)) == []

    def test_executor_dependency_building(self):
        task1 = create_mock_task("task1")
        task2 = create_mock_task("task2", dependencies={"task1": task1})
        executor = Executor([task2])
        assert executor.dependencies[task2] == {task1}
        assert executor.dependencies[task1] == set()
        assert executor.schedule == [task1, task2]

    def test_executor_run(self):
        task1 = create_mock_task("task1", result=10)
        task2 = create_mock_task("task2", result=20, dependencies={"task1": task1})
        results = list(Executor([task2]).run(quiet=True))
        assert results == [(task2, 20)]

    def test_arguments_are_passed_by_name(self):
        leaves = tuple(create_mock_task(f"leaf{i}", result=i) for i in range(4))
        total = SumTask(inputs=leaves)
        [(task, value)] = list(Executor([total]).run(quiet=True))
        assert task == total and value == 6

    def test_multiple_targets(self):
        task1 = create_mock_task("task1", result=1)
        task2 = create_mock_task("task2", result=2, dependencies={"task1": task1})
        values = dict(Executor([task1, task2]).run(quiet=True))
        assert values == {task1: 1, task2: 2}

    def test_priority_breaks_ties(self):
        low = create_mock_task("low", result=1)
        high = UrgentTask(result=2)
        total = SumTask(inputs=(low, high))
        schedule = Executor([total]).schedule
        assert schedule == [high, low, total]

    def test_timings_per_stage(self):
        leaves = tuple(create_mock_task(f"leaf{i}", result=i) for i in range(3))
        executor = Executor([SumTask(inputs=leaves)])
        executor.execute()
        assert set(executor.timings) == {"DummyTask", "SumTask"}
        assert all(t >= 0.0 for t in executor.timings.values())


class TestExecutorGroupLabel:
    def test_group_label_scheduling(self):
        task1 = create_mock_task("task1", group_label="group1")
        task2 = create_mock_task(
            "task2", dependencies={"task1": task1}, group_label="group1"
        )
        task3 = create_mock_task("task3", group_label="group2")
        task4 = create_mock_task(
            "task4",
            dependencies={"task2": task2, "task3": task3},
            group_label="group1",
        )

        schedule = Executor([task4])._make_schedule([task4])
        labels = [task.group_label() for task in schedule if task.group_label()]
        assert labels == ["group1", "group1", "group2", "group1"]

    def test_group_label_with_dependencies(self):
        task1 = create_mock_task("task1", result=1, group_label="group1")
        task2 = create_mock_task(
            "task2", result=2, dependencies={"task1": task1}, group_label="group2"
        )
        task3 = create_mock_task(
            "task3", result=3, dependencies={"task2": task2}, group_label="group1"
        )

        schedule = Executor([task3])._make_schedule([task3])
        labels = [task.group_label() for task in schedule if task.group_label()]
        group1_indices = [i for i, label in enumerate(labels) if label == "group1"]
        assert group1_indices[-1] > labels.index("group2")


class TestExecutorSingleExecution:
    def test_single_execution_per_task(self):
        EXECUTION_COUNTS.clear()

        shared_task = create_mock_task("shared_task", result=100)
        task1 = create_mock_task("task1", dependencies={"shared": shared_task})
        task2 = create_mock_task("task2", dependencies={"shared": shared_task})
        task3 = create_mock_task("task3", dependencies={"task1": task1, "task2": task2})

        Executor([task3]).execute()

        assert EXECUTION_COUNTS[shared_task] == 1


class CircularTask(Task):
    def arguments(self) -> Dict[str, Task]:
        return {"its_a_me": self}

    def execute(self, **_kwargs) -> Any:
        assert False, "Task with circular dependency executed"


class TestExecutorCircularDependency:
    def test_circular_dependency(self):
        with pytest.raises(networkx.NetworkXUnfeasible):
            Executor([CircularTask()]).execute()

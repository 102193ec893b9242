from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name='SimulationRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True,
                                           primary_key=True,
                                           serialize=False,
                                           verbose_name='ID')),
                ('benchmark', models.CharField(db_index=True,
                                               max_length=64)),
                ('size', models.PositiveIntegerField()),
                ('mechanism', models.CharField(db_index=True,
                                               max_length=32)),
                ('makespan_ns', models.FloatField()),
                ('transfer_energy_uj', models.FloatField()),
                ('stall_ns', models.FloatField(default=0.0)),
                ('nop_ns', models.FloatField(default=0.0)),
                ('utilization', models.FloatField(default=0.0)),
                ('move_count', models.PositiveIntegerField(default=0)),
                ('compute_count', models.PositiveIntegerField(default=0)),
                ('speedup_pct', models.FloatField(default=0.0)),
                ('energy_saving_pct', models.FloatField(default=0.0)),
                ('config_digest', models.CharField(blank=True,
                                                   max_length=64)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at', '-id'],
            },
        ),
    ]
